"""HTTP surface: auth, endpoint contracts, event stream."""

import json
import time

import httpx
import pytest

from blocklot.api import ApiServer
from blocklot.canonical import keyed_mac_hex
from blocklot.service import Platform


class Client:
    """Signs mutating requests the way a browser session would."""

    def __init__(self, base_url):
        self.http = httpx.Client(base_url=base_url, timeout=10)
        self.base_url = base_url
        self.keys = {}  # identityId -> secret bytes

    def register(self, name, role):
        response = self.http.post("/identities",
                                  json={"displayName": name, "role": role})
        assert response.status_code == 202, response.text
        issued = response.json()
        self.keys[issued["identityId"]] = bytes.fromhex(issued["keySecret"])
        return issued

    def post(self, path, body, identity, secret=None):
        raw = json.dumps(body).encode("utf-8")
        mac = keyed_mac_hex(secret or self.keys[identity], raw)
        return self.http.post(path, content=raw, headers={
            "Content-Type": "application/json",
            "X-Identity": identity,
            "X-Signature": mac,
        })

    def get(self, path, **kwargs):
        return self.http.get(path, **kwargs)

    def wait_committed(self, tx_id, timeout=5.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            response = self.get(f"/transactions/{tx_id}")
            if response.status_code == 200 and response.json()["status"] == "COMMITTED":
                return response.json()
            time.sleep(0.01)
        raise AssertionError(f"transaction {tx_id} not committed in {timeout}s")


def make_platform(tmp_path, *, live=True, **overrides):
    options = dict(data_dir=tmp_path / "store", peer_count=2,
                   required_endorsements=1, max_batch_size=4,
                   batch_timeout_ticks=2, seed=11, tick_interval=0.004)
    options.update(overrides)
    platform = Platform(**options)
    if live:
        platform.start()
    return platform


@pytest.fixture
def live(tmp_path):
    platform = make_platform(tmp_path)
    server = ApiServer(platform, port=0)
    server.start_background()
    client = Client(server.address)
    yield client, platform
    server.shutdown()
    platform.close()


@pytest.fixture
def manual(tmp_path):
    """No ticker: commits happen only on drain(), so races are deterministic."""
    platform = make_platform(tmp_path, live=False)
    server = ApiServer(platform, port=0)
    server.start_background()
    client = Client(server.address)
    yield client, platform
    server.shutdown()
    platform.close()


def run_auction(client, reserve=200_00):
    issued = {}
    for name, role in [("ann", "AUCTIONEER"), ("alice", "MEMBER"),
                       ("bob", "MEMBER"), ("carol", "MEMBER")]:
        issued[name] = client.register(name, role)
    client.wait_committed(issued["carol"]["txId"])  # registrations batch together
    ann, alice = issued["ann"]["identityId"], issued["alice"]["identityId"]
    bob, carol = issued["bob"]["identityId"], issued["carol"]["identityId"]
    r = client.post("/auctions", {"buyersLst": [bob, carol], "sellersLst": [alice],
                                  "auctioneer": ann}, ann)
    assert r.status_code == 202, r.text
    auction = r.json()["result"]["auctionId"]
    r = client.post("/commodities", {"description": "Sunflowers", "idealPrice": 300_00,
                                     "trackRenovations": False}, alice)
    assert r.status_code == 202
    commodity = r.json()["result"]["commodityId"]
    client.wait_committed(r.json()["txId"])
    r = client.post("/listings", {"exchangeName": "fineart", "commodityId": commodity,
                                  "reservePrice": reserve, "auctionId": auction}, alice)
    assert r.status_code == 202, r.text
    listing = r.json()["result"]["listingId"]
    client.wait_committed(r.json()["txId"])
    return {"ann": ann, "alice": alice, "bob": bob, "carol": carol,
            "auction": auction, "commodity": commodity, "listing": listing}


def bid(client, world, who, price):
    r = client.post(f"/listings/{world['listing']}/bids", {"bidPrice": price},
                    world[who])
    return r


# -- end-to-end flow --------------------------------------------------------------


def test_full_auction_over_http(live):
    client, platform = live
    world = run_auction(client)
    r = bid(client, world, "bob", 150_00)
    assert r.status_code == 202
    client.wait_committed(r.json()["txId"])
    r = bid(client, world, "carol", 250_00)
    assert r.status_code == 202
    client.wait_committed(r.json()["txId"])

    r = client.post(f"/listings/{world['listing']}/close", {}, world["ann"])
    assert r.status_code == 202
    close_tx = client.wait_committed(r.json()["txId"])
    assert close_tx["validity"] == "VALID"

    r = client.get(f"/listings/{world['listing']}")
    listing = r.json()
    assert listing["state"] == "SOLD"
    assert listing["doneBuyer"] == world["carol"]

    r = client.post(f"/listings/{world['listing']}/transfer",
                    {"proposedNewOwner": world["carol"]}, world["carol"])
    assert r.status_code == 202
    client.wait_committed(r.json()["txId"])

    r = client.get(f"/commodities/{world['commodity']}/provenance")
    prov = r.json()
    assert prov["owner"] == world["carol"]
    assert len(prov["ownershipHistory"]) == 2

    assert client.get("/chain/verify").json()["ok"] is True


def test_bid_below_max_409(manual):
    # drained platform: every endorser sees the committed max bid
    client, platform = manual
    world = run_auction_manual(client, platform)
    r = bid(client, world, "bob", 100_00)
    assert r.status_code == 202
    platform.drain()
    r = bid(client, world, "carol", 100_00)
    assert r.status_code == 409
    assert r.json()["error"] == "BID_TOO_LOW"


def test_member_close_409_not_auctioneer(manual):
    client, platform = manual
    world = run_auction_manual(client, platform)
    r = client.post(f"/listings/{world['listing']}/close", {}, world["bob"])
    assert r.status_code == 409
    assert r.json()["error"] == "NOT_AUCTIONEER"


def test_auth_failures(live):
    client, platform = live
    world = run_auction(client)
    height_before = platform.network.anchor.chain.height

    raw = json.dumps({"bidPrice": 999_00}).encode()
    # missing headers
    r = client.http.post(f"/listings/{world['listing']}/bids", content=raw,
                         headers={"Content-Type": "application/json"})
    assert r.status_code == 401
    # wrong key
    r = client.post(f"/listings/{world['listing']}/bids", {"bidPrice": 999_00},
                    world["bob"], secret=b"\x00" * 32)
    assert r.status_code == 401
    assert r.json()["error"] == "BAD_SIGNATURE"
    # forged identity header signed with someone else's key
    mac = keyed_mac_hex(client.keys[world["carol"]], raw)
    r = client.http.post(f"/listings/{world['listing']}/bids", content=raw, headers={
        "Content-Type": "application/json", "X-Identity": world["bob"],
        "X-Signature": mac})
    assert r.status_code == 401

    platform.drain()
    assert platform.network.anchor.chain.height == height_before  # nothing committed


def test_not_found_and_malformed(live):
    client, _ = live
    world = run_auction(client)
    assert client.get("/listings/l-nope").status_code == 404
    assert client.get("/commodities/c-nope/provenance").status_code == 404
    assert client.get("/blocks/999").status_code == 404
    assert client.get("/blocks/zero").status_code == 404
    assert client.get("/transactions/" + "0" * 64).status_code == 404
    assert client.get("/nope").status_code == 404
    r = client.post("/listings/l-nope/bids", {"bidPrice": 1}, world["bob"])
    assert r.status_code == 404

    raw = b"{not json"
    mac = keyed_mac_hex(client.keys[world["bob"]], raw)
    r = client.http.post(f"/listings/{world['listing']}/bids", content=raw, headers={
        "Content-Type": "application/json", "X-Identity": world["bob"],
        "X-Signature": mac})
    assert r.status_code == 422
    r = client.post(f"/listings/{world['listing']}/bids", {}, world["bob"])
    assert r.status_code == 422  # missing bidPrice -> BAD_ARGS
    r = client.http.post("/identities", json={"displayName": "x", "role": "GOD"})
    assert r.status_code == 422
    r = client.http.post("/identities", json={"displayName": "  ", "role": "MEMBER"})
    assert r.status_code == 409
    assert r.json()["error"] == "EMPTY_NAME"


def test_genesis_block_endpoint(live):
    client, _ = live
    genesis = client.get("/blocks/0").json()
    assert genesis["number"] == 0
    assert genesis["prevHash"] == "0" * 64
    assert genesis["envelopes"] == []


def test_listing_boards(live):
    client, _ = live
    world = run_auction(client)
    listings = client.get("/listings").json()["listings"]
    assert [l["listingId"] for l in listings] == [world["listing"]]
    auctions = client.get("/auctions").json()["auctions"]
    assert [a["auctionId"] for a in auctions] == [world["auction"]]
    identities = client.get("/identities").json()["identities"]
    names = {i["displayName"] for i in identities}
    assert {"ann", "alice", "bob", "carol"} <= names


def test_transfer_replay_is_no_change(live):
    client, _ = live
    world = run_auction(client, reserve=10_00)
    r = bid(client, world, "bob", 50_00)
    client.wait_committed(r.json()["txId"])
    r = client.post(f"/listings/{world['listing']}/close", {}, world["ann"])
    client.wait_committed(r.json()["txId"])
    first = client.post(f"/listings/{world['listing']}/transfer",
                        {"proposedNewOwner": world["bob"]}, world["bob"])
    assert first.json()["result"]["outcome"] == "TRANSFERRED"
    client.wait_committed(first.json()["txId"])
    second = client.post(f"/listings/{world['listing']}/transfer",
                         {"proposedNewOwner": world["bob"]}, world["bob"])
    assert second.json()["result"]["outcome"] == "NO_CHANGE"
    client.wait_committed(second.json()["txId"])
    prov = client.get(f"/commodities/{world['commodity']}/provenance").json()
    assert len(prov["ownershipHistory"]) == 2


# -- events -----------------------------------------------------------------------


def _parse_event_line(line):
    seq_text, _, payload = line.partition(" ")
    record = json.loads(payload)
    assert int(seq_text) == record["eventSeq"]
    return record


def read_events(base_url, since, stop, timeout=8.0):
    """Collect stream lines until an event predicate fires."""
    collected = []
    with httpx.stream("GET", f"{base_url}/events", params={"since": since},
                      timeout=timeout) as response:
        assert response.status_code == 200
        for line in response.iter_lines():
            if not line.strip():
                continue
            record = _parse_event_line(line)
            collected.append(record)
            if stop(record):
                break
    return collected


def test_event_stream_follows_commits(live):
    client, platform = live
    world = run_auction(client)
    r = bid(client, world, "bob", 150_00)
    client.wait_committed(r.json()["txId"])
    r = client.post(f"/listings/{world['listing']}/close", {}, world["ann"])
    client.wait_committed(r.json()["txId"])

    events = read_events(client.base_url, 0,
                         lambda e: e["kind"] == "BIDDING_CLOSED")
    kinds = [e["kind"] for e in events]
    assert "LISTING_CREATED" in kinds
    assert "BID_ACCEPTED" in kinds
    assert kinds[-1] == "BIDDING_CLOSED"
    seqs = [e["eventSeq"] for e in events]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
    accepted = [e for e in events if e["kind"] == "BID_ACCEPTED"]
    assert accepted[0]["payload"]["member"] == world["bob"]
    assert accepted[0]["payload"]["bidPrice"] == 150_00


def test_event_reconnect_loses_nothing(live):
    client, _ = live
    world = run_auction(client)
    r = bid(client, world, "bob", 110_00)
    client.wait_committed(r.json()["txId"])
    first_half = read_events(client.base_url, 0,
                             lambda e: e["kind"] == "BID_ACCEPTED")
    last_seen = first_half[-1]["eventSeq"]

    r = bid(client, world, "carol", 220_00)
    client.wait_committed(r.json()["txId"])
    r = client.post(f"/listings/{world['listing']}/close", {}, world["ann"])
    client.wait_committed(r.json()["txId"])

    second_half = read_events(client.base_url, last_seen,
                              lambda e: e["kind"] == "BIDDING_CLOSED")
    full = read_events(client.base_url, 0,
                       lambda e: e["kind"] == "BIDDING_CLOSED")
    union = first_half + second_half
    assert [e["eventSeq"] for e in union] == [e["eventSeq"] for e in full]
    assert union == full


def test_bid_race_emits_rejection_event(manual):
    client, platform = manual
    world = run_auction_manual(client, platform)
    a = bid(client, world, "bob", 300_00)
    b = bid(client, world, "carol", 300_00)  # same snapshot: same price accepted twice
    assert a.status_code == b.status_code == 202
    platform.drain()
    events = platform.events_since(0)
    kinds = [e["kind"] for e in events]
    assert "BID_ACCEPTED" in kinds and "BID_REJECTED" in kinds
    rejected = [e for e in events if e["kind"] == "BID_REJECTED"][0]
    assert rejected["payload"]["flag"] == "MVCC_CONFLICT"
    assert rejected["payload"]["member"] == world["carol"]


def run_auction_manual(client, platform):
    """run_auction without the ticker: drain after each mutation."""
    ids = {}
    for name, role in [("ann", "AUCTIONEER"), ("alice", "MEMBER"),
                       ("bob", "MEMBER"), ("carol", "MEMBER")]:
        ids[name] = client.register(name, role)["identityId"]
        platform.drain()
    r = client.post("/auctions", {"buyersLst": [ids["bob"], ids["carol"]],
                                  "sellersLst": [ids["alice"]],
                                  "auctioneer": ids["ann"]}, ids["ann"])
    assert r.status_code == 202, r.text
    ids["auction"] = r.json()["result"]["auctionId"]
    platform.drain()
    r = client.post("/commodities", {"description": "x", "idealPrice": 1,
                                     "trackRenovations": False}, ids["alice"])
    ids["commodity"] = r.json()["result"]["commodityId"]
    platform.drain()
    r = client.post("/listings", {"exchangeName": "e", "commodityId": ids["commodity"],
                                  "reservePrice": 100_00, "auctionId": ids["auction"]},
                    ids["alice"])
    ids["listing"] = r.json()["result"]["listingId"]
    platform.drain()
    return ids


def test_event_completeness_bid_accepted_matches_chain(live):
    client, platform = live
    world = run_auction(client)
    prices = [110_00, 220_00, 330_00]
    for who, price in zip(("bob", "carol", "bob"), prices):
        r = bid(client, world, who, price)
        client.wait_committed(r.json()["txId"])
    accepted = [e for e in platform.events_since(0) if e["kind"] == "BID_ACCEPTED"]
    valid_bids = 0
    for block in platform.network.anchor.chain.blocks:
        for env, flag in zip(block.envelopes, block.validity_flags):
            if env.operation == "make_bid" and flag == "VALID":
                valid_bids += 1
    assert len(accepted) == valid_bids == len(prices)


def test_restart_rebuilds_events_and_height(tmp_path):
    platform = make_platform(tmp_path)
    server = ApiServer(platform, port=0)
    server.start_background()
    client = Client(server.address)
    world = run_auction(client)
    r = bid(client, world, "bob", 300_00)
    client.wait_committed(r.json()["txId"])
    height = platform.network.anchor.chain.height
    events = platform.events_since(0)
    server.shutdown()
    platform.close()

    reborn = make_platform(tmp_path, live=False)
    try:
        assert reborn.network.anchor.chain.height == height
        rebuilt = reborn.events_since(0)
        assert [e["kind"] for e in rebuilt] == [e["kind"] for e in events]
        assert rebuilt == events
    finally:
        reborn.close()

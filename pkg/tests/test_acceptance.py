"""Acceptance suite: one test per criterion, one printed line per criterion.

Run with ``pytest tests/test_acceptance.py`` (the PASS/FAIL lines bypass
capture so they always appear).
"""

import functools
import json
import random
import sys
import time
from pathlib import Path

from blocklot import chaincode as cc
from blocklot.cli import main as cli_main
from blocklot.ledger import MVCC_CONFLICT, VALID, verify_log
from blocklot.membership import Role
from blocklot.scenario import load_scenario, run_scenario

from tests.genscenario import run_equivalence_scenario
from tests.harness import build_auction, make_network, register, submit_sync
from tests.oracle import DirectApplyOracle

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE FAIL: {name}", file=sys.__stdout__, flush=True)
                raise
            print(f"ACCEPTANCE PASS: {name}", file=sys.__stdout__, flush=True)
        return wrapper
    return decorate


# -- 1. algorithm conformance -------------------------------------------------------


@criterion("algorithm conformance: every assert of the five auction algorithms")
def test_algorithm_conformance():
    started = time.time()
    oracle = DirectApplyOracle()
    ids = {}
    for i, (name, role) in enumerate(
        [("ann", "AUCTIONEER"), ("alice", "MEMBER"), ("bob", "MEMBER"),
         ("carol", "MEMBER")], start=1,
    ):
        ids[name] = f"id-{i:05d}"
        oracle.apply(ids[name], cc.OP_REGISTER_IDENTITY, {
            "identityId": ids[name], "displayName": name, "role": role,
            "registeredAtSeq": i})

    def expect_error(creator, op, args, code):
        status, payload = oracle.apply(creator, op, args)
        assert (status, payload) == ("error", code), (op, status, payload)

    def expect_ok(creator, op, args):
        status, payload = oracle.apply(creator, op, args)
        assert status == "ok", (op, payload)
        return payload

    # environment creation asserts
    expect_error(ids["ann"], cc.OP_INITIATE_AUCTION,
                 {"buyersLst": [], "sellersLst": [ids["alice"]],
                  "auctioneer": ids["ann"]}, "EMPTY_BUYERS")
    expect_error(ids["ann"], cc.OP_INITIATE_AUCTION,
                 {"buyersLst": [ids["bob"]], "sellersLst": [],
                  "auctioneer": ids["ann"]}, "EMPTY_SELLERS")
    expect_error(ids["ann"], cc.OP_INITIATE_AUCTION,
                 {"buyersLst": [ids["bob"]], "sellersLst": [ids["alice"]],
                  "auctioneer": None}, "NULL_AUCTIONEER")
    auction = expect_ok(ids["ann"], cc.OP_INITIATE_AUCTION, {
        "buyersLst": [ids["bob"], ids["carol"]], "sellersLst": [ids["alice"]],
        "auctioneer": ids["ann"]})["auctionId"]

    # listing creation asserts
    commodity = expect_ok(ids["alice"], cc.OP_CREATE_COMMODITY, {
        "caller": ids["alice"], "description": "lot", "idealPrice": 10,
        "trackRenovations": False})["commodityId"]
    expect_error(ids["alice"], cc.OP_CREATE_LISTING, {
        "exchangeName": "", "commodityId": commodity, "sellerId": ids["alice"],
        "reservePrice": 100, "auctionId": auction}, "UNKNOWN_EXCHANGE")
    expect_error(ids["alice"], cc.OP_CREATE_LISTING, {
        "exchangeName": "fineart", "commodityId": "c-missing",
        "sellerId": ids["alice"], "reservePrice": 100, "auctionId": auction},
        "UNKNOWN_COMMODITY")
    listing = expect_ok(ids["alice"], cc.OP_CREATE_LISTING, {
        "exchangeName": "fineart", "commodityId": commodity,
        "sellerId": ids["alice"], "reservePrice": 100, "auctionId": auction},
    )["listingId"]

    # bid asserts: existence plus the strict inequality
    expect_error(ids["bob"], cc.OP_MAKE_BID, {
        "listingId": "l-missing", "potentialBuyer": ids["bob"], "bidPrice": 5},
        "UNKNOWN_LISTING")
    expect_error("id-99999", cc.OP_MAKE_BID, {
        "listingId": listing, "potentialBuyer": "id-99999", "bidPrice": 5},
        "UNKNOWN_BUYER")
    expect_ok(ids["bob"], cc.OP_MAKE_BID, {
        "listingId": listing, "potentialBuyer": ids["bob"], "bidPrice": 90})
    expect_error(ids["carol"], cc.OP_MAKE_BID, {
        "listingId": listing, "potentialBuyer": ids["carol"], "bidPrice": 90},
        "BID_TOO_LOW")
    expect_error(ids["carol"], cc.OP_MAKE_BID, {
        "listingId": listing, "potentialBuyer": ids["carol"], "bidPrice": 89},
        "BID_TOO_LOW")
    expect_ok(ids["carol"], cc.OP_MAKE_BID, {
        "listingId": listing, "potentialBuyer": ids["carol"], "bidPrice": 100})

    # close asserts: existence, auctioneer-only, reserve comparison with >=
    expect_error(ids["ann"], cc.OP_CLOSE_BIDDING, {
        "listingId": "l-missing", "caller": ids["ann"]}, "UNKNOWN_LISTING")
    expect_error(ids["alice"], cc.OP_CLOSE_BIDDING, {
        "listingId": listing, "caller": ids["alice"]}, "NOT_AUCTIONEER")
    expect_error(ids["bob"], cc.OP_CLOSE_BIDDING, {
        "listingId": listing, "caller": ids["bob"]}, "NOT_AUCTIONEER")
    closed = expect_ok(ids["ann"], cc.OP_CLOSE_BIDDING, {
        "listingId": listing, "caller": ids["ann"]})
    assert closed["state"] == cc.SOLD  # maxBid 100 == reserve 100: equality sells
    assert closed["doneBuyer"] == ids["carol"]

    # transfer asserts: existence, SOLD gate, doneBuyer match
    expect_error(ids["bob"], cc.OP_TRANSFER_ASSETS, {
        "listingId": "l-missing", "proposedNewOwner": ids["bob"]},
        "UNKNOWN_LISTING")
    expect_error(ids["bob"], cc.OP_TRANSFER_ASSETS, {
        "listingId": listing, "proposedNewOwner": "id-99999"}, "UNKNOWN_IDENTITY")
    mismatch = expect_ok(ids["bob"], cc.OP_TRANSFER_ASSETS, {
        "listingId": listing, "proposedNewOwner": ids["bob"]})
    assert mismatch["outcome"] == cc.NO_CHANGE  # doneBuyer mismatch: no change
    done = expect_ok(ids["carol"], cc.OP_TRANSFER_ASSETS, {
        "listingId": listing, "proposedNewOwner": ids["carol"]})
    assert done["outcome"] == cc.TRANSFERRED

    # a second commodity closed below reserve: NO_CHANGE on transfer
    commodity2 = expect_ok(ids["alice"], cc.OP_CREATE_COMMODITY, {
        "caller": ids["alice"], "description": "lot2", "idealPrice": 10,
        "trackRenovations": False})["commodityId"]
    listing2 = expect_ok(ids["alice"], cc.OP_CREATE_LISTING, {
        "exchangeName": "fineart", "commodityId": commodity2,
        "sellerId": ids["alice"], "reservePrice": 1000, "auctionId": auction},
    )["listingId"]
    expect_ok(ids["bob"], cc.OP_MAKE_BID, {
        "listingId": listing2, "potentialBuyer": ids["bob"], "bidPrice": 500})
    below = expect_ok(ids["ann"], cc.OP_CLOSE_BIDDING, {
        "listingId": listing2, "caller": ids["ann"]})
    assert below["state"] == cc.RESERVE_NOT_MET
    no_change = expect_ok(ids["bob"], cc.OP_TRANSFER_ASSETS, {
        "listingId": listing2, "proposedNewOwner": ids["bob"]})
    assert no_change["outcome"] == cc.NO_CHANGE

    assert time.time() - started < 10


# -- 2. oracle equivalence -----------------------------------------------------------


@criterion("oracle equivalence: 1000 random sequential scenarios, byte-identical state")
def test_oracle_equivalence_1000():
    started = time.time()
    matched = 0
    for seed in range(1000):
        outcome = run_equivalence_scenario(seed)
        assert not outcome["outcome_mismatches"], (seed, outcome["outcome_mismatches"])
        assert outcome["pipeline_values"] == outcome["oracle_values"], seed
        matched += 1
    elapsed = time.time() - started
    assert matched == 1000
    assert elapsed < 120, f"took {elapsed:.1f}s"


# -- 3. contention semantics ------------------------------------------------------------


@criterion("contention: 200 two-bid races, one VALID one MVCC_CONFLICT, retry wins")
def test_contention_semantics_200():
    for seed in range(200):
        rng = random.Random(seed)
        fx = build_auction(seed=seed + 10_000, peers=1, required=1)
        price = rng.randint(1, 900_00)
        first = fx.network.submit_operation(fx.ids["bob"], cc.OP_MAKE_BID, {
            "listingId": fx.listing_id, "potentialBuyer": fx.ids["bob"],
            "bidPrice": price})
        second = fx.network.submit_operation(fx.ids["carol"], cc.OP_MAKE_BID, {
            "listingId": fx.listing_id, "potentialBuyer": fx.ids["carol"],
            "bidPrice": price})
        fx.network.run_until_quiescent()
        chain = fx.network.anchor.chain
        flags = sorted([chain.transaction_status(first.tx_id)[2],
                        chain.transaction_status(second.tx_id)[2]])
        assert flags == sorted([VALID, MVCC_CONFLICT]), (seed, flags)
        assert chain.transaction_status(first.tx_id)[2] == VALID
        retry = fx.network.submit_operation(fx.ids["carol"], cc.OP_MAKE_BID, {
            "listingId": fx.listing_id, "potentialBuyer": fx.ids["carol"],
            "bidPrice": price + rng.randint(1, 100)})
        fx.network.run_until_quiescent()
        assert chain.transaction_status(retry.tx_id)[2] == VALID, seed


# -- 4. convergence ---------------------------------------------------------------------


@criterion("convergence: 1/3/5 peers, 100+ blocks, identical chains under faults")
def test_convergence_under_faults():
    for peer_count in (1, 3, 5):
        rng = random.Random(peer_count)
        registry, network = make_network(
            seed=peer_count, peers=peer_count, required=max(1, peer_count - 1),
            batch=1, timeout=1,
        )
        alice = register(network, registry, "alice", Role.MEMBER)
        pending = 0
        for i in range(110):
            if peer_count > 1 and i % 9 == 4:
                network.inject_delay(f"peer-{rng.randrange(1, peer_count)}",
                                     rng.randint(1, 5))
            if peer_count > 1 and i % 17 == 11:
                network.inject_reorder(f"peer-{rng.randrange(1, peer_count)}")
            network.submit_operation(alice, cc.OP_CREATE_COMMODITY, {
                "caller": alice, "description": f"lot-{i}",
                "idealPrice": i, "trackRenovations": False})
            pending += 1
            if pending >= rng.randint(1, 3):
                network.run_until_quiescent()
                pending = 0
        network.run_until_quiescent()
        chain = network.anchor.chain
        assert chain.height >= 100, (peer_count, chain.height)
        assert network.chains_identical(), peer_count
        states = {p.chain.state_fingerprint() for p in network.peers}
        assert len(states) == 1, peer_count
        assert chain.verify().ok


# -- 5. tamper detection ------------------------------------------------------------------


@criterion("tamper detection: 500 random single-byte log mutations all caught")
def test_tamper_detection_500(tmp_path):
    registry, network = make_network(seed=31, peers=1, required=1, batch=1,
                                     timeout=1, data_dir=tmp_path / "store")
    ann = register(network, registry, "ann", Role.AUCTIONEER)
    alice = register(network, registry, "alice", Role.MEMBER)
    bob = register(network, registry, "bob", Role.MEMBER)
    res = submit_sync(network, ann, cc.OP_INITIATE_AUCTION, {
        "buyersLst": [bob], "sellersLst": [alice], "auctioneer": ann})
    auction = res.result["auctionId"]
    res = submit_sync(network, alice, cc.OP_CREATE_COMMODITY, {
        "caller": alice, "description": "lot", "idealPrice": 5,
        "trackRenovations": False})
    commodity = res.result["commodityId"]
    res = submit_sync(network, alice, cc.OP_CREATE_LISTING, {
        "exchangeName": "e", "commodityId": commodity, "sellerId": alice,
        "reservePrice": 1, "auctionId": auction})
    listing = res.result["listingId"]
    for i in range(44):
        submit_sync(network, bob, cc.OP_MAKE_BID, {
            "listingId": listing, "potentialBuyer": bob, "bidPrice": (i + 1) * 100})
    chain = network.anchor.chain
    assert chain.height >= 50

    log = tmp_path / "store" / "blocks.log"
    pristine = log.read_bytes()
    policy = network.policy
    assert verify_log(tmp_path / "store", registry, policy).ok

    rng = random.Random(77)
    caught = 0
    for trial in range(500):
        raw = bytearray(pristine)
        pos = rng.randrange(len(raw))
        new = rng.randrange(256)
        while new == raw[pos]:
            new = rng.randrange(256)
        raw[pos] = new
        log.write_bytes(bytes(raw))
        report = verify_log(tmp_path / "store", registry, policy)
        assert not report.ok, f"trial {trial}: mutation at byte {pos} undetected"
        caught += 1
    assert caught == 500
    log.write_bytes(pristine)
    assert verify_log(tmp_path / "store", registry, policy).ok


# -- 6. provenance correctness ---------------------------------------------------------------


def _run_auction_cycle(network, auctioneer, auction, commodity, seller, buyer,
                       price):
    res = submit_sync(network, seller, cc.OP_CREATE_LISTING, {
        "exchangeName": "relay", "commodityId": commodity, "sellerId": seller,
        "reservePrice": 1, "auctionId": auction})
    listing = res.result["listingId"]
    submit_sync(network, buyer, cc.OP_MAKE_BID, {
        "listingId": listing, "potentialBuyer": buyer, "bidPrice": price})
    submit_sync(network, auctioneer, cc.OP_CLOSE_BIDDING, {
        "listingId": listing, "caller": auctioneer})
    submit_sync(network, buyer, cc.OP_TRANSFER_ASSETS, {
        "listingId": listing, "proposedNewOwner": buyer})
    return listing


@criterion("provenance: 5 auctions yield 6 owners with matching listings; "
           "real-estate interleaves 3 renovations")
def test_provenance_chain_of_five():
    registry, network = make_network(seed=41, peers=1, required=1)
    ann = register(network, registry, "ann", Role.AUCTIONEER)
    members = [register(network, registry, f"m{i}", Role.MEMBER) for i in range(6)]
    res = submit_sync(network, ann, cc.OP_INITIATE_AUCTION, {
        "buyersLst": members, "sellersLst": members, "auctioneer": ann})
    auction = res.result["auctionId"]

    # art profile: plain ownership chain
    res = submit_sync(network, members[0], cc.OP_CREATE_COMMODITY, {
        "caller": members[0], "description": "artwork", "idealPrice": 10,
        "trackRenovations": False})
    commodity = res.result["commodityId"]
    listings = []
    for k in range(5):
        listings.append(_run_auction_cycle(
            network, ann, auction, commodity, members[k],
            members[k + 1], (k + 1) * 100))
    prov = network.query(cc.OP_GET_PROVENANCE, {"commodityId": commodity})
    history = prov["ownershipHistory"]
    assert len(history) == 6
    assert [h["owner"] for h in history] == members
    assert history[0]["viaListingId"] == cc.GENESIS_MARKER
    assert [h["viaListingId"] for h in history[1:]] == listings
    versions = [h["acquiredAtVersion"] for h in history[1:]]
    assert versions == sorted(versions)

    # real-estate profile: three renovations interleaved at the right versions
    res = submit_sync(network, members[0], cc.OP_CREATE_COMMODITY, {
        "caller": members[0], "description": "house", "idealPrice": 10,
        "trackRenovations": True})
    house = res.result["commodityId"]
    expected_timeline = [("OWNERSHIP", members[0])]
    for k in range(3):
        owner, buyer = members[k], members[k + 1]
        submit_sync(network, owner, cc.OP_ADD_RENOVATION, {
            "commodityId": house, "caller": owner, "date": f"202{k}-01-15",
            "cost": 50 * (k + 1), "description": f"phase {k}"})
        expected_timeline.append(("RENOVATION", owner))
        _run_auction_cycle(network, ann, auction, house, owner, buyer,
                           (k + 1) * 100)
        expected_timeline.append(("OWNERSHIP", buyer))
    prov = network.query(cc.OP_GET_PROVENANCE, {"commodityId": house})
    assert len(prov["renovations"]) == 3
    timeline = [(e["kind"], e.get("owner") or e.get("renovatingOwner"))
                for e in prov["timeline"]]
    assert timeline == expected_timeline
    version_line = [tuple(e["version"]) if e["version"] else (-1, -1)
                    for e in prov["timeline"]]
    assert version_line == sorted(version_line)


# -- 7. determinism ----------------------------------------------------------------------------


@criterion("determinism: cmd_scenario_run produces byte-identical traces across 5 runs")
def test_scenario_run_determinism(tmp_path, capsys):
    traces = set()
    for run_index in range(5):
        trace_path = tmp_path / f"run{run_index}.trace"
        code = cli_main([
            "scenario", "--scenario", str(SCENARIOS / "art_auction.json"),
            "--seed", "5", "--trace-out", str(trace_path)])
        assert code == 0
        traces.add(trace_path.read_bytes())
    assert len(traces) == 1
    assert len(next(iter(traces))) > 0


# -- 8. authorization ----------------------------------------------------------------------------


@criterion("authorization: all non-auctioneer closes and seller self-bids "
           "rejected before ordering")
def test_authorization_fuzz():
    close_attempts = 0
    self_bids = 0
    for seed in range(2000, 2250):
        outcome = run_equivalence_scenario(seed)
        committed_tx_ids = set()
        for block in outcome["network"].anchor.chain.blocks:
            for env in block.envelopes:
                committed_tx_ids.add(env.tx_id)
        for step in outcome["steps"]:
            if step["intent"] == "nonauctioneer_close":
                close_attempts += 1
                assert step["outcome"] == ("error", "NOT_AUCTIONEER"), step
                assert step["txId"] is None  # never reached the orderer
            elif step["intent"] == "seller_self_bid":
                self_bids += 1
                assert step["outcome"][0] == "error", step
                assert step["outcome"][1] in ("SELF_BID", "NOT_ACTIVE_BUYER",
                                              "LISTING_NOT_OPEN"), step
                assert step["txId"] is None
    assert close_attempts >= 100, close_attempts
    assert self_bids >= 100, self_bids

"""Platform assembly consumed by the HTTP API and the CLI.

Owns the registry, the simulated network, the live event log, and a
background ticker that drives the logical clock in wall time so batch
timeouts fire while serving. All mutations serialize through one lock.
"""

import json
import threading
from pathlib import Path

from . import chaincode
from .canonical import canonical_serialize
from .errors import LedgerError
from .ledger import EndorsementPolicy, StateKey, verify_log
from .membership import MembershipRegistry, Role
from .pipeline import Network, OrdererConfig

CONFIG_NAME = "config.json"
IDENTITIES_NAME = "identities.json"

LISTING_CREATED = "LISTING_CREATED"
BID_ACCEPTED = "BID_ACCEPTED"
BID_REJECTED = "BID_REJECTED"
BIDDING_CLOSED = "BIDDING_CLOSED"
ASSET_TRANSFERRED = "ASSET_TRANSFERRED"
BLOCK_COMMITTED = "BLOCK_COMMITTED"


class Platform:
    def __init__(self, data_dir=None, peer_count: int = 3,
                 required_endorsements: int = 2, max_batch_size: int = 5,
                 batch_timeout_ticks: int = 3, seed: int | None = None,
                 tick_interval: float = 0.02):
        self._lock = threading.RLock()
        self._data_dir = Path(data_dir) if data_dir else None
        identities_path = None
        if self._data_dir:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            identities_path = self._data_dir / IDENTITIES_NAME
            stored = self._load_config()
            if stored:
                peer_count = stored["peerCount"]
                required_endorsements = stored["requiredEndorsements"]
                max_batch_size = stored["maxBatchSize"]
                batch_timeout_ticks = stored["batchTimeoutTicks"]
        self.registry = MembershipRegistry(seed=seed, path=identities_path)
        self.network = Network(
            self.registry, peer_count=peer_count,
            required_endorsements=required_endorsements,
            orderer_config=OrdererConfig(max_batch_size, batch_timeout_ticks),
            data_dir=self._data_dir,
        )
        if self._data_dir:
            self._save_config(peer_count, required_endorsements, max_batch_size,
                              batch_timeout_ticks)
        self._events: list = []
        self._event_cond = threading.Condition()
        self._tx_results: dict = {}
        self._closed = False
        self._ticker: threading.Thread | None = None
        self._tick_interval = tick_interval
        # events are derived data: rebuild from the committed chain, then listen
        for block in self.network.anchor.chain.blocks[1:]:
            self._on_commit(block)
        self.network.anchor.chain.add_commit_listener(self._on_commit)

    # -- lifecycle -------------------------------------------------------------

    def start(self):
        if self._ticker:
            return
        self._ticker = threading.Thread(target=self._tick_loop, daemon=True)
        self._ticker.start()

    def close(self):
        self._closed = True
        if self._ticker:
            self._ticker.join(timeout=2)
            self._ticker = None
        with self._event_cond:
            self._event_cond.notify_all()

    def _tick_loop(self):
        import time

        while not self._closed:
            time.sleep(self._tick_interval)
            with self._lock:
                self.network.advance()

    def drain(self, max_ticks: int = 10_000):
        """Advance the clock until the pipeline quiesces (test/CLI helper)."""
        with self._lock:
            self.network.run_until_quiescent(max_ticks)

    # -- event derivation --------------------------------------------------------

    def _on_commit(self, block):
        with self._event_cond:
            for env, flag in zip(block.envelopes, block.validity_flags):
                kind, payload = self._envelope_event(env, flag)
                if kind:
                    self._push_event(kind, payload)
            self._push_event(BLOCK_COMMITTED, {
                "number": block.number,
                "txIds": [e.tx_id for e in block.envelopes],
                "operations": [e.operation for e in block.envelopes],
                "flags": list(block.validity_flags),
            })
            self._event_cond.notify_all()

    def _push_event(self, kind, payload):
        self._events.append({
            "eventSeq": len(self._events) + 1, "kind": kind, "payload": payload,
        })

    @staticmethod
    def _envelope_event(env, flag):
        writes = dict(env.write_set)
        if env.operation == chaincode.OP_MAKE_BID:
            base = {
                "txId": env.tx_id,
                "listingId": env.args["listingId"],
                "member": env.args["potentialBuyer"],
                "bidPrice": env.args["bidPrice"],
            }
            if flag == "VALID":
                offer_id = f"o-{env.tx_id[:20]}"
                return BID_ACCEPTED, {**base, "offerId": offer_id}
            return BID_REJECTED, {**base, "flag": flag}
        if flag != "VALID":
            return None, None
        if env.operation == chaincode.OP_CREATE_LISTING:
            listing_id = f"l-{env.tx_id[:20]}"
            return LISTING_CREATED, {
                "txId": env.tx_id,
                "listingId": listing_id,
                "commodityId": env.args["commodityId"],
                "sellerId": env.args["sellerId"],
                "reservePrice": env.args["reservePrice"],
                "exchangeName": env.args["exchangeName"],
                "auctionId": env.args["auctionId"],
            }
        if env.operation == chaincode.OP_CLOSE_BIDDING:
            listing = writes.get(f"listing/{env.args['listingId']}")
            return BIDDING_CLOSED, {
                "txId": env.tx_id,
                "listingId": env.args["listingId"],
                "state": listing["state"] if listing else None,
                "doneBuyer": listing["doneBuyer"] if listing else None,
            }
        if env.operation == chaincode.OP_TRANSFER_ASSETS:
            transferred = bool(writes)
            return ASSET_TRANSFERRED, {
                "txId": env.tx_id,
                "listingId": env.args["listingId"],
                "outcome": chaincode.TRANSFERRED if transferred else chaincode.NO_CHANGE,
                "newOwner": env.args["proposedNewOwner"] if transferred else None,
            }
        return None, None

    # -- mutations -----------------------------------------------------------------

    def register_identity(self, display_name: str, role: Role) -> dict:
        with self._lock:
            ident = self.registry.register(display_name, role)
            submitted = self.network.submit_operation(
                ident.identity_id, chaincode.OP_REGISTER_IDENTITY, {
                    "identityId": ident.identity_id,
                    "displayName": ident.display_name,
                    "role": ident.role.value,
                    "registeredAtSeq": ident.registered_at_seq,
                },
            )
            self._tx_results[submitted.tx_id] = submitted.result
            return {
                "identityId": ident.identity_id,
                "displayName": ident.display_name,
                "role": ident.role.value,
                "registeredAtSeq": ident.registered_at_seq,
                "keyRef": ident.key_ref,
                "keySecret": self.registry.key_secret_hex(ident.identity_id),
                "txId": submitted.tx_id,
            }

    def submit_operation(self, creator: str, operation: str, args: dict):
        """Returns (txId, endorsed result); raises PipelineError on rejection."""
        with self._lock:
            submitted = self.network.submit_operation(creator, operation, args)
            self._tx_results[submitted.tx_id] = submitted.result
            return submitted.tx_id, submitted.result

    # -- queries -------------------------------------------------------------------

    def _chain(self):
        return self.network.anchor.chain

    def _scan(self, namespace: str) -> list:
        prefix = namespace + "/"
        state = self._chain().state_mapping()
        records = [rec for key, (rec, _) in state.items() if key.startswith(prefix)]
        records.sort(key=lambda r: canonical_serialize(r))
        return records

    def listings(self) -> list:
        return self._scan("listing")

    def auctions(self) -> list:
        return self._scan("environment")

    def identities(self) -> list:
        return [i.record() for i in self.registry.identities()]

    def get_record(self, namespace: str, entity_id: str):
        entry = self._chain().get_record(StateKey(namespace, entity_id))
        return entry[0] if entry else None

    def provenance(self, commodity_id: str):
        """Full ownership chain and renovations merged in commit order."""
        with self._lock:
            return self.network.query(
                chaincode.OP_GET_PROVENANCE, {"commodityId": commodity_id}
            )

    def block_record(self, number: int):
        chain = self._chain()
        if 0 <= number <= chain.height:
            return chain.blocks[number].record()
        return None

    def verify(self):
        with self._lock:
            if self._data_dir:
                return verify_log(self._data_dir, self.registry, self.network.policy)
            return self._chain().verify()

    def transaction(self, tx_id: str):
        status = self._chain().transaction_status(tx_id)
        if status:
            block, index, flag = status
            return {
                "txId": tx_id, "status": "COMMITTED", "block": block,
                "index": index, "validity": flag,
                "result": self._tx_results.get(tx_id),
            }
        if tx_id in self._tx_results:
            return {"txId": tx_id, "status": "PENDING",
                    "result": self._tx_results[tx_id]}
        return None

    # -- events ---------------------------------------------------------------------

    def events_since(self, since_seq: int) -> list:
        with self._event_cond:
            return [e for e in self._events if e["eventSeq"] > since_seq]

    def wait_events(self, since_seq: int, timeout: float = 10.0) -> list:
        """Events after since_seq, blocking up to timeout for new ones."""
        with self._event_cond:
            pending = [e for e in self._events if e["eventSeq"] > since_seq]
            if pending or self._closed:
                return pending
            self._event_cond.wait(timeout)
            return [e for e in self._events if e["eventSeq"] > since_seq]

    @property
    def closed(self) -> bool:
        return self._closed

    # -- config persistence ------------------------------------------------------------

    def _config_path(self) -> Path:
        return self._data_dir / CONFIG_NAME

    def _load_config(self):
        path = self._config_path()
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (ValueError, OSError) as exc:
            raise LedgerError("CORRUPT_LOG", f"unreadable {CONFIG_NAME}: {exc}") from None

    def _save_config(self, peer_count, required_endorsements, max_batch_size,
                     batch_timeout_ticks):
        doc = {
            "peerCount": peer_count,
            "requiredEndorsements": required_endorsements,
            "maxBatchSize": max_batch_size,
            "batchTimeoutTicks": batch_timeout_ticks,
            "endorsers": list(self.network.policy.endorser_set),
        }
        tmp = self._config_path().with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=1), encoding="utf-8")
        tmp.replace(self._config_path())


def load_store_policy(data_dir) -> EndorsementPolicy:
    """Rebuild the endorsement policy recorded in a data directory."""
    path = Path(data_dir) / CONFIG_NAME
    doc = json.loads(path.read_text(encoding="utf-8"))
    return EndorsementPolicy(doc["requiredEndorsements"], tuple(doc["endorsers"]))


def load_store_registry(data_dir) -> MembershipRegistry:
    return MembershipRegistry(path=Path(data_dir) / IDENTITIES_NAME)

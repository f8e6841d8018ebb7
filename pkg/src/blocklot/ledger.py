"""Append-only hash-chained block log with key-versioned world state.

Commit-time validation is Fabric-style MVCC: an envelope is VALID iff its
client signature verifies, its endorsements satisfy the policy, its txId is
fresh, and every read version still matches the state as updated by earlier
VALID envelopes of the same block. Invalid envelopes stay in their block,
flagged. World state is always the left-fold of VALID write sets over the
genesis state.
"""

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .canonical import ZERO_DIGEST_HEX, canonical_digest_hex, canonical_serialize
from .errors import LedgerError
from .membership import MembershipRegistry, Signature

NAMESPACES = ("commodity", "listing", "offer", "renovation", "environment", "identity")

VALID = "VALID"
MVCC_CONFLICT = "MVCC_CONFLICT"
BAD_ENDORSEMENT = "BAD_ENDORSEMENT"
DUPLICATE_TXID = "DUPLICATE_TXID"
BAD_SIGNATURE = "BAD_SIGNATURE"

BLOCK_LOG_NAME = "blocks.log"
SNAPSHOT_NAME = "state.json"

_ABSENT = object()


@dataclass(frozen=True, order=True)
class Version:
    block_number: int
    tx_index: int

    def record(self) -> list:
        return [self.block_number, self.tx_index]

    @staticmethod
    def from_record(rec) -> "Version | None":
        return None if rec is None else Version(rec[0], rec[1])


@dataclass(frozen=True)
class StateKey:
    namespace: str
    entity_id: str

    def render(self) -> str:
        return f"{self.namespace}/{self.entity_id}"

    @classmethod
    def parse(cls, rendered: str) -> "StateKey":
        namespace, sep, entity_id = rendered.partition("/")
        if not sep or namespace not in NAMESPACES:
            raise LedgerError("BAD_STATE_KEY", f"unparseable state key {rendered!r}")
        return cls(namespace, entity_id)


def version_record(version: Version | None):
    return None if version is None else version.record()


@dataclass
class TransactionEnvelope:
    """A proposed operation with its simulated effects and attestations.

    ``read_set``/``write_set`` hold rendered keys; write values are
    structured records (None marks a delete).
    """

    tx_id: str
    creator: str
    operation: str
    args: dict
    nonce: int
    read_set: list  # [(rendered_key, Version | None)]
    write_set: list  # [(rendered_key, record | None)]
    endorsements: list  # [Signature]
    client_signature: Signature | None = None

    def body_record(self) -> dict:
        return {
            "txId": self.tx_id,
            "creator": self.creator,
            "operation": self.operation,
            "args": self.args,
            "nonce": self.nonce,
            "readSet": [
                {"key": k, "version": version_record(v)} for k, v in self.read_set
            ],
            "writeSet": [{"key": k, "value": v} for k, v in self.write_set],
            "endorsements": [e.record() for e in self.endorsements],
        }

    def record(self) -> dict:
        rec = self.body_record()
        rec["clientSignature"] = (
            self.client_signature.record() if self.client_signature else None
        )
        return rec

    def endorsement_payload(self) -> bytes:
        """Canonical bytes every endorser signs: the simulated effects."""
        return canonical_serialize({
            "operation": self.operation,
            "args": self.args,
            "readSet": [
                {"key": k, "version": version_record(v)} for k, v in self.read_set
            ],
            "writeSet": [{"key": k, "value": v} for k, v in self.write_set],
        })

    @classmethod
    def from_record(cls, rec: dict) -> "TransactionEnvelope":
        sig = rec.get("clientSignature")
        return cls(
            tx_id=rec["txId"],
            creator=rec["creator"],
            operation=rec["operation"],
            args=rec["args"],
            nonce=rec["nonce"],
            read_set=[
                (r["key"], Version.from_record(r["version"])) for r in rec["readSet"]
            ],
            write_set=[(w["key"], w["value"]) for w in rec["writeSet"]],
            endorsements=[Signature.from_record(e) for e in rec["endorsements"]],
            client_signature=Signature.from_record(sig) if sig else None,
        )


def endorsement_payload_record(operation: str, args: dict, read_set, write_set) -> bytes:
    return canonical_serialize({
        "operation": operation,
        "args": args,
        "readSet": [{"key": k, "version": version_record(v)} for k, v in read_set],
        "writeSet": [{"key": k, "value": v} for k, v in write_set],
    })


@dataclass
class Block:
    number: int
    prev_hash: str
    data_hash: str
    envelopes: list
    validity_flags: list | None = None

    def record(self) -> dict:
        return {
            "number": self.number,
            "prevHash": self.prev_hash,
            "dataHash": self.data_hash,
            "envelopes": [e.record() for e in self.envelopes],
            "validityFlags": self.validity_flags,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Block":
        return cls(
            number=rec["number"],
            prev_hash=rec["prevHash"],
            data_hash=rec["dataHash"],
            envelopes=[TransactionEnvelope.from_record(e) for e in rec["envelopes"]],
            validity_flags=rec["validityFlags"],
        )


def data_hash_for(envelopes) -> str:
    return canonical_digest_hex([e.record() for e in envelopes])


def compute_block_hash(block: Block) -> str:
    """Digest over (number, prevHash, dataHash); validity flags excluded."""
    return canonical_digest_hex({
        "number": block.number,
        "prevHash": block.prev_hash,
        "dataHash": block.data_hash,
    })


def make_genesis() -> Block:
    return Block(0, ZERO_DIGEST_HEX, data_hash_for([]), [], [])


@dataclass(frozen=True)
class EndorsementPolicy:
    """m-of-n agreement requirement over a fixed endorser set."""

    required_count: int
    endorser_set: tuple

    def __post_init__(self):
        n = len(self.endorser_set)
        if not 1 <= self.required_count <= n:
            raise ValueError(
                f"policy requires 1 <= m <= n, got m={self.required_count} n={n}"
            )


def validate_envelopes(snapshot, envelopes, policy: EndorsementPolicy,
                       registry: MembershipRegistry, seen_tx_ids,
                       block_number: int) -> list:
    """Assign a validity flag to each envelope, in order.

    ``snapshot`` maps rendered key -> (record, Version) at the previous block
    boundary; it is never mutated. Never raises: failures become flags, with
    precedence BAD_SIGNATURE > BAD_ENDORSEMENT > DUPLICATE_TXID > MVCC.
    """
    flags = []
    overlay: dict = {}  # in-block effects of earlier VALID envelopes
    block_tx_ids: set = set()
    for idx, env in enumerate(envelopes):
        flag = _validate_one(
            env, snapshot, overlay, policy, registry, seen_tx_ids, block_tx_ids
        )
        block_tx_ids.add(env.tx_id)
        if flag == VALID:
            version = Version(block_number, idx)
            for key, value in env.write_set:
                overlay[key] = _ABSENT if value is None else version
        flags.append(flag)
    return flags


def _validate_one(env, snapshot, overlay, policy, registry, seen_tx_ids,
                  block_tx_ids) -> str:
    if env.client_signature is None or not registry.verify(
        env.creator, canonical_serialize(env.body_record()), env.client_signature
    ):
        return BAD_SIGNATURE

    payload = env.endorsement_payload()
    signers = set()
    for endorsement in env.endorsements:
        if endorsement.signer not in policy.endorser_set:
            return BAD_ENDORSEMENT
        if endorsement.signer in signers:
            return BAD_ENDORSEMENT
        if not registry.verify(endorsement.signer, payload, endorsement):
            return BAD_ENDORSEMENT
        signers.add(endorsement.signer)
    if len(signers) < policy.required_count:
        return BAD_ENDORSEMENT

    if env.tx_id in seen_tx_ids or env.tx_id in block_tx_ids:
        return DUPLICATE_TXID

    for key, read_version in env.read_set:
        if key in overlay:
            current = None if overlay[key] is _ABSENT else overlay[key]
        else:
            entry = snapshot.get(key)
            current = entry[1] if entry else None
        if current != read_version:
            return MVCC_CONFLICT
    return VALID


@dataclass
class VerifyProblem:
    block: int
    kind: str  # STRUCTURAL | LINKAGE | DATA_HASH | FLAGS_MISMATCH | STATE_DIVERGENCE
    detail: str

    def record(self) -> dict:
        return {"block": self.block, "kind": self.kind, "detail": self.detail}


@dataclass
class VerifyReport:
    ok: bool
    height: int
    problems: list = field(default_factory=list)

    @property
    def first_bad_block(self) -> int | None:
        return self.problems[0].block if self.problems else None

    def record(self) -> dict:
        return {
            "ok": self.ok,
            "height": self.height,
            "problems": [p.record() for p in self.problems],
        }


class Chain:
    """One peer's ledger copy: block list plus derived state and histories.

    Commits are serialized by a lock; reads observe only committed block
    boundaries. With ``data_dir`` the chain persists one canonical line per
    block plus a world-state snapshot, and recovers on construction.
    """

    def __init__(self, registry: MembershipRegistry, policy: EndorsementPolicy,
                 data_dir: str | Path | None = None):
        self.registry = registry
        self.policy = policy
        self._lock = threading.RLock()
        self.blocks: list[Block] = []
        self._state: dict = {}  # rendered key -> (record, Version)
        self._history: dict = {}  # rendered key -> [(Version, record|None, tx_id)]
        self._tx_ids: set = set()
        self._tx_index: dict = {}  # tx_id -> (block_number, tx_index, flag)
        self._listeners: list = []
        self._data_dir = Path(data_dir) if data_dir else None
        self._log_path = self._data_dir / BLOCK_LOG_NAME if self._data_dir else None
        if self._log_path and self._log_path.exists():
            self._recover()
        else:
            self._commit_genesis()

    # -- commit path ---------------------------------------------------------

    def _commit_genesis(self):
        genesis = make_genesis()
        if self._log_path:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            with open(self._log_path, "ab") as f:
                f.write(canonical_serialize(genesis.record()) + b"\n")
        self.blocks.append(genesis)
        self._write_snapshot()

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.number

    def add_commit_listener(self, fn):
        self._listeners.append(fn)

    def append_block(self, block: Block) -> Block:
        """Validate, flag, apply and persist the next block atomically."""
        with self._lock:
            tip = self.tip
            if block.number != tip.number + 1:
                raise LedgerError(
                    "BAD_LINKAGE",
                    f"expected block {tip.number + 1}, got {block.number}",
                )
            if block.prev_hash != compute_block_hash(tip):
                raise LedgerError(
                    "BAD_LINKAGE", f"stale prevHash on block {block.number}"
                )
            if block.data_hash != data_hash_for(block.envelopes):
                raise LedgerError(
                    "BAD_LINKAGE", f"dataHash mismatch on block {block.number}"
                )
            flags = validate_envelopes(
                self._state, block.envelopes, self.policy, self.registry,
                self._tx_ids, block.number,
            )
            committed = Block(
                block.number, block.prev_hash, block.data_hash,
                block.envelopes, flags,
            )
            if self._log_path:
                with open(self._log_path, "ab") as f:
                    f.write(canonical_serialize(committed.record()) + b"\n")
                    f.flush()
            self._apply(committed)
            self._write_snapshot()
        for fn in self._listeners:
            fn(committed)
        return committed

    def _apply(self, block: Block):
        for idx, (env, flag) in enumerate(zip(block.envelopes, block.validity_flags)):
            self._tx_ids.add(env.tx_id)
            self._tx_index[env.tx_id] = (block.number, idx, flag)
            if flag != VALID:
                continue
            version = Version(block.number, idx)
            for key, value in env.write_set:
                if value is None:
                    self._state.pop(key, None)
                else:
                    self._state[key] = (value, version)
                self._history.setdefault(key, []).append((version, value, env.tx_id))
        self.blocks.append(block)

    # -- reads ---------------------------------------------------------------

    def get_state(self, key: StateKey):
        """Current committed (valueBytes, Version), or None when absent."""
        entry = self._state.get(key.render())
        if entry is None:
            return None
        record, version = entry
        return canonical_serialize(record), version

    def get_record(self, key: StateKey):
        entry = self._state.get(key.render())
        if entry is None:
            return None
        return entry

    def get_history(self, key: StateKey) -> list:
        """Every VALID write to the key in chain order: (Version, record|None, txId)."""
        return list(self._history.get(key.render(), ()))

    def state_mapping(self) -> dict:
        """The committed state map used as a chaincode snapshot."""
        return self._state

    def state_fingerprint(self, include_versions: bool = True) -> bytes:
        doc = {}
        for key, (record, version) in self._state.items():
            if include_versions:
                doc[key] = {"value": record, "version": version.record()}
            else:
                doc[key] = record
        return canonical_serialize(doc)

    def chain_fingerprint(self) -> bytes:
        return canonical_serialize([b.record() for b in self.blocks])

    def transaction_status(self, tx_id: str):
        return self._tx_index.get(tx_id)

    # -- verification ----------------------------------------------------------

    def verify(self) -> VerifyReport:
        """Recompute every linkage, hash and flag; replay and compare state."""
        report = _verify_blocks(self.blocks, self.registry, self.policy)
        if report.ok:
            replayed = _replay_state(self.blocks)
            if replayed != self._state:
                report.ok = False
                report.problems.append(VerifyProblem(
                    self.height, "STATE_DIVERGENCE",
                    "replayed world state differs from live state",
                ))
        return report

    # -- persistence -----------------------------------------------------------

    def _snapshot_path(self) -> Path:
        return self._data_dir / SNAPSHOT_NAME

    def _write_snapshot(self):
        if not self._data_dir:
            return
        doc = {
            "lastBlock": self.height,
            "entries": {
                key: {"value": record, "version": version.record()}
                for key, (record, version) in self._state.items()
            },
        }
        tmp = self._snapshot_path().with_suffix(".tmp")
        tmp.write_bytes(canonical_serialize(doc))
        tmp.replace(self._snapshot_path())

    def _recover(self):
        lines, torn = read_block_log(self._log_path)
        if torn:
            # torn append from an interrupted commit: roll it back
            with open(self._log_path, "r+b") as f:
                f.truncate(sum(len(l) + 1 for l in lines))
        blocks = []
        for i, raw in enumerate(lines):
            try:
                rec = json.loads(raw)
                blocks.append(Block.from_record(rec))
            except (ValueError, KeyError, TypeError) as exc:
                raise LedgerError(
                    "CORRUPT_LOG", f"unparseable block line {i}: {exc}"
                ) from None
        if not blocks:
            raise LedgerError("CORRUPT_LOG", "empty block log")
        report = _verify_blocks(blocks, self.registry, self.policy)
        if not report.ok:
            bad = report.problems[0]
            raise LedgerError(
                "CORRUPT_LOG", f"block {bad.block}: {bad.kind} ({bad.detail})"
            )
        genesis = blocks[0]
        self.blocks.append(genesis)
        for block in blocks[1:]:
            self._apply(block)
        self._reconcile_snapshot()
        self._write_snapshot()

    def _reconcile_snapshot(self):
        path = self._snapshot_path()
        if not path.exists():
            return
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc["lastBlock"] > self.height:
            raise LedgerError(
                "CORRUPT_LOG",
                f"snapshot at block {doc['lastBlock']} is ahead of log tip {self.height}",
            )
        snap = {
            key: (entry["value"], Version.from_record(entry["version"]))
            for key, entry in doc["entries"].items()
        }
        replayed = _replay_state(self.blocks[: doc["lastBlock"] + 1])
        if replayed != snap:
            raise LedgerError(
                "CORRUPT_LOG",
                f"snapshot diverges from log replay at block {doc['lastBlock']}",
            )


def read_block_log(path: str | Path):
    """Split the log into complete lines; a missing final newline marks a torn tail."""
    data = Path(path).read_bytes()
    complete = data.endswith(b"\n")
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
        torn = False
    else:
        torn = True
        if not complete and lines:
            lines.pop()
    return lines, torn


def _replay_state(blocks) -> dict:
    state: dict = {}
    for block in blocks:
        for idx, (env, flag) in enumerate(zip(block.envelopes, block.validity_flags)):
            if flag != VALID:
                continue
            version = Version(block.number, idx)
            for key, value in env.write_set:
                if value is None:
                    state.pop(key, None)
                else:
                    state[key] = (value, version)
    return state


def _verify_blocks(blocks, registry, policy) -> VerifyReport:
    """Structural + linkage + dataHash + flag re-validation over parsed blocks."""
    problems = []
    state: dict = {}
    tx_ids: set = set()
    for i, block in enumerate(blocks):
        if block.number != i:
            problems.append(VerifyProblem(i, "LINKAGE", f"expected number {i}, got {block.number}"))
            break
        if i == 0:
            if block.prev_hash != ZERO_DIGEST_HEX:
                problems.append(VerifyProblem(0, "LINKAGE", "genesis prevHash not all-zero"))
                break
        elif block.prev_hash != compute_block_hash(blocks[i - 1]):
            problems.append(VerifyProblem(i, "LINKAGE", "prevHash mismatch"))
            break
        if block.data_hash != data_hash_for(block.envelopes):
            problems.append(VerifyProblem(i, "DATA_HASH", "dataHash does not cover envelopes"))
            break
        if block.validity_flags is None or len(block.validity_flags) != len(block.envelopes):
            problems.append(VerifyProblem(i, "FLAGS_MISMATCH", "missing or short validityFlags"))
            break
        expected_flags = validate_envelopes(
            state, block.envelopes, policy, registry, tx_ids, block.number
        )
        if expected_flags != block.validity_flags:
            problems.append(VerifyProblem(
                i, "FLAGS_MISMATCH",
                f"recomputed flags {expected_flags} != stored {block.validity_flags}",
            ))
            break
        for idx, (env, flag) in enumerate(zip(block.envelopes, block.validity_flags)):
            tx_ids.add(env.tx_id)
            if flag != VALID:
                continue
            version = Version(block.number, idx)
            for key, value in env.write_set:
                if value is None:
                    state.pop(key, None)
                else:
                    state[key] = (value, version)
    height = blocks[-1].number if blocks else -1
    return VerifyReport(ok=not problems, height=height, problems=problems)


def verify_log(data_dir: str | Path, registry: MembershipRegistry,
               policy: EndorsementPolicy) -> VerifyReport:
    """Inspect persisted bytes: every mutation of the log must surface here.

    Checks, per line: canonical round-trip, then the full block checks of
    ``_verify_blocks``, then replay against the persisted snapshot when one
    exists. Mismatches become report entries, never exceptions.
    """
    log_path = Path(data_dir) / BLOCK_LOG_NAME
    if not log_path.exists():
        return VerifyReport(ok=False, height=-1, problems=[
            VerifyProblem(0, "STRUCTURAL", "missing block log"),
        ])
    lines, torn = read_block_log(log_path)
    problems = []
    blocks = []
    for i, raw in enumerate(lines):
        try:
            rec = json.loads(raw)
            if canonical_serialize(rec) != raw:
                raise ValueError("line is not in canonical form")
            blocks.append(Block.from_record(rec))
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(VerifyProblem(i, "STRUCTURAL", f"unparseable block line: {exc}"))
            break
    if torn and not problems:
        problems.append(VerifyProblem(
            len(lines), "STRUCTURAL", "log ends mid-block (torn or truncated line)",
        ))
    if not blocks and not problems:
        problems.append(VerifyProblem(0, "STRUCTURAL", "empty block log"))
    if problems:
        return VerifyReport(ok=False, height=len(blocks) - 1, problems=problems)

    report = _verify_blocks(blocks, registry, policy)
    if not report.ok:
        return report

    snap_path = Path(data_dir) / SNAPSHOT_NAME
    if snap_path.exists():
        try:
            doc = json.loads(snap_path.read_text(encoding="utf-8"))
            snap = {
                key: (entry["value"], Version.from_record(entry["version"]))
                for key, entry in doc["entries"].items()
            }
            replayed = _replay_state(blocks[: doc["lastBlock"] + 1])
        except (ValueError, KeyError, TypeError) as exc:
            report.ok = False
            report.problems.append(VerifyProblem(
                report.height, "STRUCTURAL", f"unparseable snapshot: {exc}"
            ))
            return report
        if replayed != snap:
            report.ok = False
            report.problems.append(VerifyProblem(
                doc["lastBlock"], "STATE_DIVERGENCE",
                "persisted snapshot diverges from log replay",
            ))
    return report

"""Simulated execute-order-validate pipeline.

One process hosts the client, the endorsing peers, a deterministic orderer
and the gossip fabric. Nodes communicate through delivery queues driven by
a logical tick clock; with a fixed seed every run is byte-reproducible.
Consensus is a single deterministic orderer behind the ordering interface.
"""

from dataclasses import dataclass, field

from . import chaincode
from .canonical import canonical_digest_hex, canonical_serialize
from .errors import ChaincodeError, PipelineError
from .ledger import (
    Block,
    Chain,
    EndorsementPolicy,
    TransactionEnvelope,
    compute_block_hash,
    data_hash_for,
    endorsement_payload_record,
)
from .membership import MembershipRegistry, Role, Signature


@dataclass(frozen=True)
class Proposal:
    """A signed client intent; immutable once signed."""

    creator: str
    operation: str
    args: dict
    nonce: int
    signature: Signature

    def body_record(self) -> dict:
        return {
            "creator": self.creator,
            "operation": self.operation,
            "args": self.args,
            "nonce": self.nonce,
        }

    @property
    def tx_id(self) -> str:
        return chaincode.derive_tx_id(
            self.creator, self.nonce, self.operation, self.args
        )


def make_proposal(registry: MembershipRegistry, creator: str, operation: str,
                  args: dict, nonce: int) -> Proposal:
    body = {"creator": creator, "operation": operation, "args": args, "nonce": nonce}
    sig = registry.sign(creator, canonical_serialize(body))
    return Proposal(creator, operation, args, nonce, sig)


@dataclass(frozen=True)
class OrdererConfig:
    max_batch_size: int = 10
    batch_timeout_ticks: int = 5

    def __post_init__(self):
        if self.max_batch_size < 1 or self.batch_timeout_ticks < 1:
            raise ValueError("orderer bounds must be >= 1")


class Orderer:
    """FIFO batcher: cuts a block at max_batch_size envelopes or
    batch_timeout_ticks after the oldest pending one, whichever first."""

    def __init__(self, config: OrdererConfig, tip: Block):
        self.config = config
        self._prev_hash = compute_block_hash(tip)
        self._next_number = tip.number + 1
        self._pending: list = []  # [(arrival_tick, envelope)]

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def receive(self, envelope: TransactionEnvelope, tick: int) -> list:
        self._pending.append((tick, envelope))
        blocks = []
        while len(self._pending) >= self.config.max_batch_size:
            batch = self._pending[: self.config.max_batch_size]
            del self._pending[: self.config.max_batch_size]
            blocks.append(self._cut([env for _, env in batch]))
        return blocks

    def on_tick(self, tick: int) -> list:
        if self._pending and tick - self._pending[0][0] >= self.config.batch_timeout_ticks:
            batch, self._pending = self._pending, []
            return [self._cut([env for _, env in batch])]
        return []

    def _cut(self, envelopes) -> Block:
        block = Block(
            self._next_number, self._prev_hash, data_hash_for(envelopes),
            envelopes, None,
        )
        self._prev_hash = compute_block_hash(block)
        self._next_number += 1
        return block


@dataclass
class EndorsementOutcome:
    peer_id: str
    ok: bool
    read_set: list = field(default_factory=list)
    write_set: list = field(default_factory=list)
    result: dict | None = None
    signature: Signature | None = None
    error_code: str | None = None
    error_message: str = ""
    dropped: bool = False


class Peer:
    """Endorses against its own committed snapshot and commits gossiped blocks."""

    def __init__(self, peer_id: str, identity_id: str, chain: Chain, is_anchor: bool):
        self.peer_id = peer_id
        self.identity_id = identity_id
        self.chain = chain
        self.is_anchor = is_anchor

    def endorse(self, proposal: Proposal, registry: MembershipRegistry) -> EndorsementOutcome:
        try:
            executed = chaincode.execute(
                proposal.operation, proposal.creator, proposal.args,
                self.chain.state_mapping(), proposal.tx_id,
            )
        except ChaincodeError as exc:
            return EndorsementOutcome(
                self.peer_id, ok=False, error_code=exc.code, error_message=exc.message,
            )
        payload = endorsement_payload_record(
            proposal.operation, proposal.args, executed.read_set, executed.write_set
        )
        signature = registry.sign(self.identity_id, payload)
        return EndorsementOutcome(
            self.peer_id, ok=True, read_set=executed.read_set,
            write_set=executed.write_set, result=executed.result,
            signature=signature,
        )


@dataclass
class SubmitResult:
    tx_id: str
    result: dict
    envelope: TransactionEnvelope


@dataclass
class _Delivery:
    due_tick: int
    seq: int
    peer_index: int
    block: Block


class Network:
    """The whole simulated network behind one submit/advance surface.

    Peer 0 is the anchor: it receives blocks from the orderer, commits, and
    gossips to every other peer. Faults (delay, reorder, drop-endorsement)
    are injected per peer and honored deterministically.
    """

    def __init__(self, registry: MembershipRegistry, peer_count: int = 1,
                 required_endorsements: int = 1,
                 orderer_config: OrdererConfig | None = None,
                 data_dir=None, tracer=None):
        if peer_count < 1:
            raise ValueError("need at least one peer")
        self.registry = registry
        self.tracer = tracer
        self.tick = 0
        peer_identities = [
            self._peer_identity(f"peer-{i}") for i in range(peer_count)
        ]
        self.policy = EndorsementPolicy(
            required_endorsements, tuple(i.identity_id for i in peer_identities)
        )
        self.peers = []
        for i, ident in enumerate(peer_identities):
            chain = Chain(registry, self.policy, data_dir=data_dir if i == 0 else None)
            self.peers.append(Peer(f"peer-{i}", ident.identity_id, chain, i == 0))
        self.anchor = self.peers[0]
        # a recovered anchor may be ahead: sync the fresh peers before use
        for peer in self.peers[1:]:
            for block in self.anchor.chain.blocks[1:]:
                peer.chain.append_block(_without_flags(block))
        self.orderer = Orderer(orderer_config or OrdererConfig(), self.anchor.chain.tip)
        self._deliveries: list[_Delivery] = []
        self._next_delivery_seq = 0
        self._delay_faults: dict = {}  # peer_index -> [extra ticks]
        self._reorder_pending: set = set()
        self._held: dict = {}  # peer_index -> Block
        self._drop_endorsements: dict = {}  # peer_index -> count

    def _peer_identity(self, name: str):
        for ident in self.registry.identities():
            if ident.display_name == name and ident.role is Role.MEMBER:
                return ident
        return self.registry.register(name, Role.MEMBER)

    def _trace(self, event: str, **payload):
        if self.tracer:
            self.tracer({"event": event, "tick": self.tick, **payload})

    # -- fault injection -----------------------------------------------------

    def peer_index(self, peer_id: str) -> int:
        for i, peer in enumerate(self.peers):
            if peer.peer_id == peer_id:
                return i
        raise PipelineError("UNKNOWN_PEER", f"no peer {peer_id!r}")

    def inject_delay(self, peer_id: str, ticks: int):
        self._delay_faults.setdefault(self.peer_index(peer_id), []).append(ticks)
        self._trace("FAULT", kind="delay", peer=peer_id, ticks=ticks)

    def inject_reorder(self, peer_id: str):
        index = self.peer_index(peer_id)
        if index == 0:
            raise PipelineError("BAD_FAULT", "cannot reorder deliveries to the anchor")
        self._reorder_pending.add(index)
        self._trace("FAULT", kind="reorder", peer=peer_id)

    def drop_next_endorsement(self, peer_id: str):
        index = self.peer_index(peer_id)
        self._drop_endorsements[index] = self._drop_endorsements.get(index, 0) + 1
        self._trace("FAULT", kind="drop-endorsement", peer=peer_id)

    # -- client surface --------------------------------------------------------

    def next_nonce(self) -> int:
        count = getattr(self, "_nonce_counter", 0) + 1
        self._nonce_counter = count
        return count

    def submit_operation(self, creator: str, operation: str, args: dict) -> SubmitResult:
        proposal = make_proposal(
            self.registry, creator, operation, args, self.next_nonce()
        )
        return self.submit(proposal)

    def submit(self, proposal: Proposal) -> SubmitResult:
        """Collect endorsements, assemble the envelope, forward to ordering."""
        if proposal.operation in chaincode.READ_ONLY_OPERATIONS:
            raise PipelineError(
                "READ_ONLY_OPERATION", f"{proposal.operation} is served as a query"
            )
        if not self.registry.verify(
            proposal.creator, canonical_serialize(proposal.body_record()),
            proposal.signature,
        ):
            raise PipelineError("BAD_SIGNATURE", "proposal signature does not verify")
        tx_id = proposal.tx_id
        self._trace("SUBMITTED", txId=tx_id, operation=proposal.operation,
                    creator=proposal.creator)

        outcomes = []
        for index, peer in enumerate(self.peers):
            if peer.identity_id not in self.policy.endorser_set:
                continue
            if self._drop_endorsements.get(index, 0) > 0:
                self._drop_endorsements[index] -= 1
                outcomes.append(EndorsementOutcome(peer.peer_id, ok=False, dropped=True))
                continue
            outcomes.append(peer.endorse(proposal, self.registry))

        groups: dict = {}
        for outcome in outcomes:
            if not outcome.ok:
                continue
            key = endorsement_payload_record(
                proposal.operation, proposal.args, outcome.read_set, outcome.write_set
            )
            groups.setdefault(key, []).append(outcome)
        agreeing = None
        for group in groups.values():  # insertion order: first largest wins
            if len(group) >= self.policy.required_count:
                if agreeing is None or len(group) > len(agreeing):
                    agreeing = group

        if agreeing is None:
            errors = [o for o in outcomes if not o.ok and not o.dropped]
            successes = [o for o in outcomes if o.ok]
            codes = {o.error_code for o in errors}
            if errors and not successes and len(codes) == 1:
                code = errors[0].error_code
                self._trace("CHAINCODE_ERROR", txId=tx_id, code=code,
                            operation=proposal.operation, creator=proposal.creator)
                error = PipelineError(
                    "CHAINCODE_ERROR", f"{code}: {errors[0].error_message}"
                )
                error.chaincode_code = code
                raise error from None
            self._trace("ENDORSEMENT_SHORTFALL", txId=tx_id,
                        outcomes=[_outcome_record(o) for o in outcomes])
            raise PipelineError(
                "ENDORSEMENT_SHORTFALL",
                f"only {max((len(g) for g in groups.values()), default=0)} agreeing "
                f"endorsements, {self.policy.required_count} required",
            )

        lead = agreeing[0]
        envelope = TransactionEnvelope(
            tx_id=tx_id, creator=proposal.creator, operation=proposal.operation,
            args=proposal.args, nonce=proposal.nonce, read_set=lead.read_set,
            write_set=lead.write_set,
            endorsements=[o.signature for o in agreeing],
        )
        envelope.client_signature = self.registry.sign(
            proposal.creator, canonical_serialize(envelope.body_record())
        )
        for block in self.orderer.receive(envelope, self.tick):
            self._schedule_anchor(block)
        return SubmitResult(tx_id, lead.result, envelope)

    def query(self, operation: str, args: dict) -> dict:
        """Read-only op served from the anchor's committed state; never ordered."""
        executed = chaincode.execute(
            operation, "query", args, self.anchor.chain.state_mapping(), "query"
        )
        return executed.result

    # -- scheduling ------------------------------------------------------------

    def _schedule_anchor(self, block: Block):
        self._trace("BLOCK_CUT", number=block.number,
                    txIds=[e.tx_id for e in block.envelopes])
        self._enqueue(0, block, self.tick + 1)

    def _enqueue(self, peer_index: int, block: Block, due_tick: int):
        delays = self._delay_faults.get(peer_index)
        if delays:
            due_tick += delays.pop(0)
        self._deliveries.append(
            _Delivery(due_tick, self._next_delivery_seq, peer_index, block)
        )
        self._next_delivery_seq += 1

    def advance(self, ticks: int = 1):
        for _ in range(ticks):
            self.tick += 1
            for block in self.orderer.on_tick(self.tick):
                self._schedule_anchor(block)
            due = sorted(
                (d for d in self._deliveries if d.due_tick <= self.tick),
                key=lambda d: d.seq,
            )
            for delivery in due:
                self._deliveries.remove(delivery)
                self._deliver(delivery)

    def run_until_quiescent(self, max_ticks: int = 10_000):
        """Advance until nothing is pending anywhere; raises if the cap hits."""
        for _ in range(max_ticks):
            if self.orderer.pending_count == 0 and not self._deliveries:
                if self._held:
                    # a reorder fault with no follow-up block: deliver what we have
                    for index in sorted(self._held):
                        self._commit_to_peer(index, self._held.pop(index))
                    continue
                return
            self.advance()
        raise PipelineError("STUCK", "network failed to quiesce")

    def _deliver(self, delivery: _Delivery):
        index = delivery.peer_index
        if index in self._reorder_pending and index not in self._held:
            self._reorder_pending.discard(index)
            self._held[index] = delivery.block
            return
        self._commit_to_peer(index, delivery.block)
        held = self._held.pop(index, None)
        if held is not None:
            self._commit_to_peer(index, held)

    def _commit_to_peer(self, peer_index: int, block: Block):
        peer = self.peers[peer_index]
        chain = peer.chain
        if block.number <= chain.height:
            self._trace("STALE_BLOCK", peer=peer.peer_id, number=block.number)
            return
        expected = chain.height + 1
        if block.number > expected:
            self._trace("GAP_DETECTED", peer=peer.peer_id, expected=expected,
                        received=block.number)
            backfill = list(range(expected, block.number))
            for number in backfill:
                self._append(peer, self.anchor.chain.blocks[number])
            self._trace("BACKFILL", peer=peer.peer_id, numbers=backfill)
        self._append(peer, block)
        if peer.is_anchor:
            for other_index in range(len(self.peers)):
                if other_index != peer_index:
                    self._enqueue(other_index, chain.blocks[block.number], self.tick + 1)

    def _append(self, peer: Peer, block: Block):
        committed = peer.chain.append_block(_without_flags(block))
        self._trace("COMMITTED", peer=peer.peer_id, number=committed.number,
                    flags=list(committed.validity_flags),
                    txIds=[e.tx_id for e in committed.envelopes])

    # -- whole-network assertions ------------------------------------------------

    def chains_identical(self) -> bool:
        fingerprints = {p.chain.chain_fingerprint() for p in self.peers}
        return len(fingerprints) == 1


def _without_flags(block: Block) -> Block:
    return Block(block.number, block.prev_hash, block.data_hash, block.envelopes, None)


def _outcome_record(outcome: EndorsementOutcome) -> dict:
    return {
        "peer": outcome.peer_id,
        "ok": outcome.ok,
        "dropped": outcome.dropped,
        "error": outcome.error_code,
    }

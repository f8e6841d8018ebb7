"""Scenario files: parse, run against a fresh network, check expectations.

A scenario registers identities, then replays timed steps through the
pipeline under the logical-tick scheduler. Entity ids are derived at run
time, so steps and expectations use symbolic references: "@name" for an
identity, "$label" for the id returned by an earlier labeled step.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import chaincode
from .canonical import canonical_serialize
from .errors import PipelineError, ScenarioParseError
from .membership import MembershipRegistry, Role
from .pipeline import Network, OrdererConfig

FAULT_KINDS = ("delay", "reorder", "drop-endorsement")
_ID_RESULT_KEYS = ("auctionId", "commodityId", "listingId", "offerId", "renovationId")


@dataclass
class IdentitySpec:
    name: str
    role: str


@dataclass
class Step:
    tick: int
    index: int
    actor: str | None = None
    operation: str | None = None
    args: dict | None = None
    label: str | None = None
    fault: str | None = None
    peer: str | None = None
    ticks: int = 0


@dataclass
class Scenario:
    name: str
    profile: str
    peer_count: int
    required_endorsements: int
    max_batch_size: int
    batch_timeout_ticks: int
    identities: list
    steps: list
    expect: dict


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
            where=f"line {exc.lineno}",
        ) from None
    return parse_scenario(doc)


def parse_scenario(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario must be a JSON object")
    profile = doc.get("profile", "art")
    if profile not in ("art", "real-estate"):
        raise ScenarioParseError(f"unknown profile {profile!r}", where="profile")
    identities = []
    seen_names = set()
    for i, rec in enumerate(_expect_list(doc, "identities")):
        where = f"identities[{i}]"
        if not isinstance(rec, dict) or not isinstance(rec.get("name"), str):
            raise ScenarioParseError("identity needs a string name", where=where)
        if rec.get("role") not in ("MEMBER", "AUCTIONEER"):
            raise ScenarioParseError(
                f"identity role must be MEMBER or AUCTIONEER, got {rec.get('role')!r}",
                where=where,
            )
        if rec["name"] in seen_names:
            raise ScenarioParseError(f"duplicate identity name {rec['name']!r}", where=where)
        seen_names.add(rec["name"])
        identities.append(IdentitySpec(rec["name"], rec["role"]))
    steps = []
    for i, rec in enumerate(_expect_list(doc, "steps")):
        where = f"steps[{i}]"
        if not isinstance(rec, dict):
            raise ScenarioParseError("step must be an object", where=where)
        tick = rec.get("tick")
        if not isinstance(tick, int) or tick < 1:
            raise ScenarioParseError("step tick must be an integer >= 1", where=where)
        if "fault" in rec:
            if rec["fault"] not in FAULT_KINDS:
                raise ScenarioParseError(f"unknown fault {rec['fault']!r}", where=where)
            if not isinstance(rec.get("peer"), str):
                raise ScenarioParseError("fault needs a target peer", where=where)
            ticks = rec.get("ticks", 1)
            if rec["fault"] == "delay" and (not isinstance(ticks, int) or ticks < 1):
                raise ScenarioParseError("delay needs ticks >= 1", where=where)
            steps.append(Step(tick=tick, index=i, fault=rec["fault"],
                              peer=rec["peer"], ticks=ticks))
            continue
        operation = rec.get("operation")
        if operation not in chaincode.OPERATIONS:
            raise ScenarioParseError(f"unknown operation {operation!r}", where=where)
        if not isinstance(rec.get("actor"), str):
            raise ScenarioParseError("step needs an actor", where=where)
        if rec["actor"] not in seen_names:
            raise ScenarioParseError(f"unknown actor {rec['actor']!r}", where=where)
        args = rec.get("args")
        if not isinstance(args, dict):
            raise ScenarioParseError("step args must be an object", where=where)
        label = rec.get("label")
        if label is not None and not isinstance(label, str):
            raise ScenarioParseError("label must be a string", where=where)
        steps.append(Step(tick=tick, index=i, actor=rec["actor"], operation=operation,
                          args=args, label=label))
    expect = doc.get("expect", {})
    if not isinstance(expect, dict):
        raise ScenarioParseError("expect must be an object", where="expect")
    for section in expect:
        if section not in ("listings", "commodities", "environments"):
            raise ScenarioParseError(f"unknown expect section {section!r}", where="expect")
    return Scenario(
        name=doc.get("name", "scenario"),
        profile=profile,
        peer_count=_bounded_int(doc, "peers", default=1, low=1, high=16),
        required_endorsements=_bounded_int(doc, "requiredEndorsements", default=1, low=1, high=16),
        max_batch_size=_bounded_int(doc, "maxBatchSize", default=5, low=1, high=1000),
        batch_timeout_ticks=_bounded_int(doc, "batchTimeoutTicks", default=3, low=1, high=1000),
        identities=identities,
        steps=steps,
        expect=expect,
    )


def _expect_list(doc, key):
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise ScenarioParseError(f"{key} must be a list", where=key)
    return value


def _bounded_int(doc, key, default, low, high):
    value = doc.get(key, default)
    if not isinstance(value, int) or not low <= value <= high:
        raise ScenarioParseError(f"{key} must be an integer in [{low}, {high}]", where=key)
    return value


@dataclass
class ScenarioRun:
    scenario: Scenario
    seed: int
    network: Network
    registry: MembershipRegistry
    trace: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    identity_ids: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def trace_bytes(self) -> bytes:
        return b"".join(canonical_serialize(rec) + b"\n" for rec in self.trace)


def run_scenario(scenario: Scenario, seed: int = 0) -> ScenarioRun:
    trace: list = []

    def tracer(rec):
        trace.append({"seq": len(trace) + 1, **rec})

    registry = MembershipRegistry(seed=seed)
    network = Network(
        registry,
        peer_count=scenario.peer_count,
        required_endorsements=scenario.required_endorsements,
        orderer_config=OrdererConfig(scenario.max_batch_size, scenario.batch_timeout_ticks),
        tracer=tracer,
    )
    run = ScenarioRun(scenario, seed, network, registry, trace)

    for spec in scenario.identities:
        ident = registry.register(spec.name, Role(spec.role))
        run.identity_ids[spec.name] = ident.identity_id
        network.submit_operation(
            ident.identity_id, chaincode.OP_REGISTER_IDENTITY, {
                "identityId": ident.identity_id,
                "displayName": ident.display_name,
                "role": ident.role.value,
                "registeredAtSeq": ident.registered_at_seq,
            },
        )
    network.run_until_quiescent()

    epoch = network.tick
    for step in sorted(scenario.steps, key=lambda s: (s.tick, s.index)):
        target = epoch + step.tick
        while network.tick < target:
            network.advance()
        _run_step(run, step)
    network.run_until_quiescent()

    run.failures.extend(check_expectations(run))
    return run


def _run_step(run: ScenarioRun, step: Step):
    network = run.network
    if step.fault:
        try:
            if step.fault == "delay":
                network.inject_delay(step.peer, step.ticks)
            elif step.fault == "reorder":
                network.inject_reorder(step.peer)
            else:
                network.drop_next_endorsement(step.peer)
        except PipelineError as exc:
            run.failures.append(f"steps[{step.index}]: {exc.message}")
        return
    try:
        args = resolve_refs(step.args, run.identity_ids, run.labels)
    except KeyError as exc:
        run.failures.append(f"steps[{step.index}]: unresolved reference {exc.args[0]}")
        network._trace("SKIPPED_STEP", index=step.index, reason=str(exc.args[0]))
        return
    if step.operation == chaincode.OP_CREATE_COMMODITY and "trackRenovations" not in args:
        args["trackRenovations"] = run.scenario.profile == "real-estate"
    actor_id = run.identity_ids[step.actor]
    if step.operation in chaincode.READ_ONLY_OPERATIONS:
        try:
            result = network.query(step.operation, args)
            network._trace("QUERY", operation=step.operation, actor=actor_id,
                           result=result)
        except Exception as exc:  # surfaced in trace; queries never abort a run
            network._trace("QUERY_ERROR", operation=step.operation, actor=actor_id,
                           error=getattr(exc, "code", type(exc).__name__))
        return
    try:
        submitted = network.submit_operation(actor_id, step.operation, args)
    except PipelineError:
        return  # already traced as CHAINCODE_ERROR / ENDORSEMENT_SHORTFALL
    if step.label:
        for key in _ID_RESULT_KEYS:
            if key in submitted.result:
                run.labels[step.label] = submitted.result[key]
                break


def resolve_refs(value, identity_ids: dict, labels: dict):
    """Replace "@name" / "$label" strings recursively; KeyError when undefined."""
    if isinstance(value, str):
        if value.startswith("@"):
            name = value[1:]
            if name not in identity_ids:
                raise KeyError(value)
            return identity_ids[name]
        if value.startswith("$"):
            label = value[1:]
            if label not in labels:
                raise KeyError(value)
            return labels[label]
        return value
    if isinstance(value, list):
        return [resolve_refs(v, identity_ids, labels) for v in value]
    if isinstance(value, dict):
        return {k: resolve_refs(v, identity_ids, labels) for k, v in value.items()}
    return value


_EXPECT_NAMESPACES = {
    "listings": "listing",
    "commodities": "commodity",
    "environments": "environment",
}


def check_expectations(run: ScenarioRun) -> list:
    """Compare committed anchor state to the scenario's expect block."""
    failures = []
    state = run.network.anchor.chain.state_mapping()
    for section, namespace in _EXPECT_NAMESPACES.items():
        for ref, expected_fields in run.scenario.expect.get(section, {}).items():
            try:
                entity_id = resolve_refs(ref, run.identity_ids, run.labels)
            except KeyError:
                failures.append(f"{section}[{ref}]: unresolved reference")
                continue
            entry = state.get(f"{namespace}/{entity_id}")
            if entry is None:
                failures.append(f"{section}[{ref}]: no committed record for {entity_id}")
                continue
            view = _entity_view(namespace, entry[0])
            for field_name, expected in expected_fields.items():
                if field_name not in view:
                    failures.append(f"{section}[{ref}]: no such field {field_name!r}")
                    continue
                try:
                    expected = resolve_refs(expected, run.identity_ids, run.labels)
                except KeyError:
                    failures.append(
                        f"{section}[{ref}].{field_name}: unresolved reference"
                    )
                    continue
                actual = view[field_name]
                if actual != expected:
                    failures.append(
                        f"{section}[{ref}].{field_name}: expected {expected!r}, got {actual!r}"
                    )
    return failures


def _entity_view(namespace: str, record: dict) -> dict:
    if namespace == "listing":
        max_bid = record["maxBid"]
        return {
            "state": record["state"],
            "doneBuyer": record["doneBuyer"],
            "maxBidPrice": max_bid["bidPrice"] if max_bid else None,
            "offersCount": len(record["offerIds"]),
            "reservePrice": record["reservePrice"],
            "sellerId": record["sellerId"],
            "exchangeName": record["exchangeName"],
            "transferred": record["transferred"],
        }
    if namespace == "commodity":
        return {
            "owner": record["owner"],
            "ownersCount": len(record["ownershipHistory"]),
            "renovationsCount": len(record["renovationIds"]),
            "trackRenovations": record["trackRenovations"],
            "description": record["description"],
            "idealPrice": record["idealPrice"],
        }
    return {
        "open": record["open"],
        "listingsCount": len(record["listingIds"]),
        "activeAuctioneer": record["activeAuctioneer"],
    }

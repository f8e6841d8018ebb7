"""Operator entry point: serve the API, replay scenarios, query, verify."""

import argparse
import sys
from pathlib import Path

from . import chaincode
from .api import ApiServer
from .canonical import canonical_serialize
from .errors import BlocklotError, ChaincodeError, LedgerError, ScenarioParseError
from .ledger import Chain
from .scenario import load_scenario, run_scenario
from .service import Platform, load_store_policy, load_store_registry


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocklot",
        description="Permissioned commodity-auction ledger (desk-scale simulation)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP API over a ledger store")
    serve.add_argument("--data-dir", required=True)
    serve.add_argument("--listen", default="127.0.0.1:8460", help="host:port")
    serve.add_argument("--peers", type=int, default=3)
    serve.add_argument("--endorsements", type=int, default=2,
                       help="required agreeing endorsements (m of n peers)")
    serve.add_argument("--batch-size", type=int, default=5)
    serve.add_argument("--timeout-ticks", type=int, default=3)
    serve.add_argument("--tick-interval", type=float, default=0.02,
                       help="seconds per logical tick")
    serve.add_argument("--seed", type=int, default=None)
    serve.add_argument("--ui-dir", default=None,
                       help="directory with the built web UI (default: autodetect)")

    scen = sub.add_parser("scenario", help="replay a scenario file deterministically")
    scen.add_argument("--scenario", required=True)
    scen.add_argument("--seed", type=int, default=0)
    scen.add_argument("--trace-out", default=None,
                      help="trace file path (default: <scenario>.trace)")
    scen.add_argument("--format", choices=("human", "canonical"), default="human")

    prov = sub.add_parser("provenance", help="print a commodity's committed provenance")
    prov.add_argument("commodity_id")
    prov.add_argument("--data-dir", required=True)
    prov.add_argument("--format", choices=("human", "canonical"), default="human")

    verify = sub.add_parser("verify", help="check chain integrity in a data directory")
    verify.add_argument("--data-dir", required=True)
    verify.add_argument("--format", choices=("human", "canonical"), default="human")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "serve": cmd_serve,
        "scenario": cmd_scenario_run,
        "provenance": cmd_query_provenance,
        "verify": cmd_verify_chain,
    }[args.command]
    return handler(args)


def cmd_serve(args) -> int:
    host, _, port_text = args.listen.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        print(f"bad --listen {args.listen!r}, expected host:port", file=sys.stderr)
        return 1
    try:
        platform = Platform(
            data_dir=args.data_dir, peer_count=args.peers,
            required_endorsements=args.endorsements,
            max_batch_size=args.batch_size,
            batch_timeout_ticks=args.timeout_ticks,
            seed=args.seed, tick_interval=args.tick_interval,
        )
    except (BlocklotError, ValueError, OSError) as exc:
        print(f"cannot start: {exc}", file=sys.stderr)
        return 1
    ui_dir = args.ui_dir
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if not candidate.is_dir():
            candidate = Path.cwd() / "frontend" / "dist"
        ui_dir = candidate if candidate.is_dir() else None
    platform.start()
    try:
        server = ApiServer(platform, host or "127.0.0.1", port, ui_dir=ui_dir)
    except OSError as exc:
        print(f"cannot bind {args.listen}: {exc}", file=sys.stderr)
        platform.close()
        return 1
    print(f"listening on {server.address} (height {platform.network.anchor.chain.height})")
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        platform.close()
    return 0


def cmd_scenario_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioParseError as exc:
        where = f" ({exc.where})" if exc.where else ""
        print(f"scenario parse error{where}: {exc.message}", file=sys.stderr)
        return 2
    run = run_scenario(scenario, seed=args.seed)
    trace_path = Path(args.trace_out or f"{args.scenario}.trace")
    trace_path.write_bytes(run.trace_bytes())
    summary = {
        "scenario": scenario.name,
        "seed": args.seed,
        "blocks": run.network.anchor.chain.height,
        "events": len(run.trace),
        "expectations": "ok" if run.ok else "failed",
        "trace": str(trace_path),
    }
    if args.format == "canonical":
        sys.stdout.buffer.write(canonical_serialize(
            {**summary, "failures": run.failures}) + b"\n")
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")
        for failure in run.failures:
            print(f"  mismatch: {failure}")
    return 1 if run.failures else 0


def _open_store(data_dir):
    registry = load_store_registry(data_dir)
    policy = load_store_policy(data_dir)
    chain = Chain(registry, policy, data_dir=data_dir)
    return registry, policy, chain


def cmd_query_provenance(args) -> int:
    try:
        _, _, chain = _open_store(args.data_dir)
    except (BlocklotError, OSError, ValueError) as exc:
        print(f"cannot open store: {exc}", file=sys.stderr)
        return 1
    try:
        executed = chaincode.execute(
            chaincode.OP_GET_PROVENANCE, "query",
            {"commodityId": args.commodity_id}, chain.state_mapping(), "query",
        )
    except ChaincodeError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return 1
    result = executed.result
    if args.format == "canonical":
        sys.stdout.buffer.write(canonical_serialize(result) + b"\n")
        return 0
    print(f"commodity {result['commodityId']} (current owner {result['owner']})")
    for event in result["timeline"]:
        version = event["version"]
        at = f"block {version[0]} tx {version[1]}" if version else "creation"
        if event["kind"] == "OWNERSHIP":
            via = event["viaListingId"]
            source = "genesis" if via == chaincode.GENESIS_MARKER else f"listing {via}"
            print(f"  [{at}] owner -> {event['owner']} ({source})")
        else:
            print(f"  [{at}] renovation {event['renovationId']} on {event['date']}"
                  f" cost {event['cost']} by {event['renovatingOwner']}")
    return 0


def cmd_verify_chain(args) -> int:
    from .ledger import verify_log

    try:
        registry = load_store_registry(args.data_dir)
        policy = load_store_policy(args.data_dir)
    except (BlocklotError, OSError, ValueError) as exc:
        print(f"cannot open store: {exc}", file=sys.stderr)
        return 1
    report = verify_log(args.data_dir, registry, policy)
    if args.format == "canonical":
        sys.stdout.buffer.write(canonical_serialize(report.record()) + b"\n")
    elif report.ok:
        print(f"ok: {report.height + 1} blocks verified")
    else:
        for problem in report.problems:
            print(f"block {problem.block}: {problem.kind} - {problem.detail}")
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())

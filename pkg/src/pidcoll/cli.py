"""Command line entry point: ``pidcoll <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import BenchConfig, emit_report, run_matrix
from .clients import HttpCollectionClient, HttpRegistryClient
from .collection_service import CollectionService, StageDelays
from .costmodel import Calibration
from .distributor import execute, plan
from .errors import DepositError, PidcollError
from .graphgen import Case, GenParams, generate
from .model import ObjectGraph
from .registry import DEFAULT_SIZE_CAP, PidRegistry
from .resolver import Resolver
from .server import collection_handler, registry_handler, serve
from .store import KVStore

log = logging.getLogger("pidcoll")


def cmd_generate(args) -> int:
    p = GenParams(
        case=Case.parse(args.case),
        num_collections=args.collections,
        members_per_collection=args.members,
        max_backbone_out_degree=args.max_degree,
        edge_density=args.density,
        seed=args.seed,
        num_roots=args.roots or None,
        pid_prefix=args.prefix,
    )
    g = generate(p)
    Path(args.out).write_text(g.dumps())
    log.info("wrote %d nodes, %d edges, %d roots to %s", len(g.nodes), len(g.edges), len(g.roots), args.out)
    return 0


def cmd_deposit(args) -> int:
    g = ObjectGraph.loads(Path(args.graph).read_text())
    p = plan(g, args.strategy, args.collections)
    if args.plan_out:
        Path(args.plan_out).write_text(p.dumps())
    try:
        report = execute(p, HttpRegistryClient(args.registry), HttpCollectionClient(args.collections))
    except DepositError as exc:
        exc.report.write_csv(args.report)
        raise
    report.write_csv(args.report)
    counts = report.counts()
    log.info("deposited %s", ", ".join(f"{k.value}={v}" for k, v in sorted(counts.items())))
    return 0


def cmd_resolve(args) -> int:
    resolver = Resolver(HttpRegistryClient(args.registry), HttpCollectionClient(args.collections))
    result = resolver.resolve_provenance(args.root, args.mode, args.max_depth)
    if args.trace:
        result.write_trace_csv(args.trace)
    if args.edges:
        Path(args.edges).write_text(result.edges_json())
    vols = result.volumes()
    log.info("%d edges; requests %s; %d dangling", len(result.edges),
             ", ".join(f"{k.value}={v}" for k, v in vols.items()), len(result.dangling))
    return 0


def cmd_bench_run(args) -> int:
    config = BenchConfig.load(args.config, mode=args.mode, parallel=args.parallel or None)
    report = run_matrix(config)
    for path in emit_report(report, args.out):
        log.info("wrote %s", path)
    return 0


def cmd_serve(args) -> int:
    store = KVStore(args.store, flush_every=args.flush_every) if args.store else KVStore()
    if args.service == "registry":
        handler = registry_handler(PidRegistry(store, size_cap=args.size_cap))
    else:
        delays = None
        if args.delays == "calibrated":
            delays = StageDelays.from_config(Calibration.load(args.cost_model).stage_delays(), args.delay_scale)
        handler = collection_handler(CollectionService(store, delays))
    port = args.port if args.port is not None else (8080 if args.service == "registry" else 5000)
    serve(handler, args.host, port, on_stop=store.checkpoint)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pidcoll", description="Provenance placement testbed for PID records and collections.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic provenance graph as JSON")
    g.add_argument("--case", required=True, help="g1, g2, g3 or g4")
    g.add_argument("--collections", type=int, required=True)
    g.add_argument("--members", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-degree", type=int, default=3)
    g.add_argument("--density", type=float, default=0.05)
    g.add_argument("--roots", type=int, default=1, help="number of roots (0 = every unreferenced node)")
    g.add_argument("--prefix", default="20.5000")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("deposit", help="deposit a graph into running services")
    d.add_argument("--graph", required=True)
    d.add_argument("--strategy", required=True, help="i1, i2 or i3")
    d.add_argument("--registry", required=True, help="registry base URL")
    d.add_argument("--collections", required=True, help="collection service base URL")
    d.add_argument("--report", default="deposit.csv")
    d.add_argument("--plan-out", help="also write the deposit plan as JSON")
    d.set_defaults(func=cmd_deposit)

    r = sub.add_parser("resolve", help="resolve provenance backward from a root")
    r.add_argument("--root", required=True, action="append", help="root reference; repeatable")
    r.add_argument("--mode", choices=("dedup", "naive"), default="dedup")
    r.add_argument("--max-depth", type=int)
    r.add_argument("--registry", default="http://127.0.0.1:8080")
    r.add_argument("--collections", default="http://127.0.0.1:5000")
    r.add_argument("--trace", default="trace.csv")
    r.add_argument("--edges", default="edges.json")
    r.set_defaults(func=cmd_resolve)

    b = sub.add_parser("bench", help="benchmark matrix")
    bsub = b.add_subparsers(dest="bench_command", required=True)
    br = bsub.add_parser("run", help="run every configured cell and write the report")
    br.add_argument("--config", required=True)
    br.add_argument("--mode", choices=("sim", "real"))
    br.add_argument("--out", default="report")
    br.add_argument("--parallel", action="store_true", help="run cells in worker processes (sim only)")
    br.set_defaults(func=cmd_bench_run)

    s = sub.add_parser("serve", help="run one service in the foreground")
    s.add_argument("service", choices=("registry", "collections"))
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int)
    s.add_argument("--store", help="append-only log file; in-memory when omitted")
    s.add_argument("--flush-every", type=int, default=1, help="append to the log every N writes")
    s.add_argument("--size-cap", type=int, default=DEFAULT_SIZE_CAP)
    s.add_argument("--delays", choices=("calibrated", "none"), default="none")
    s.add_argument("--delay-scale", type=float, default=1.0)
    s.add_argument("--cost-model", help="calibration YAML; the shipped one by default")
    s.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PidcollError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())

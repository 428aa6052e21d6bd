"""Deposit-and-resolve experiments over the case x strategy matrix.

Two modes:

``sim``
    In-process services, costs drawn from a calibrated :class:`CostModel`
    on a virtual clock. Fully deterministic for a given config and seed.
``real``
    Local HTTP services (or externally supplied URLs) with measured times.
    The collection service can carry synthetic stage delays. Only orderings
    are meaningful here.
"""

from __future__ import annotations

import csv
import logging
import uuid
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .clients import (
    DEPOSIT_KINDS,
    RESOLVE_KINDS,
    HttpCollectionClient,
    HttpRegistryClient,
    LocalCollectionClient,
    LocalRegistryClient,
    RequestKind,
)
from .collection_service import CollectionService, StageDelays
from .costmodel import DEFAULT_JITTER_FRACTION, Calibration, CostSampler
from .distributor import DEFAULT_COLLECTION_BASE, DepositReport, Strategy, execute, plan
from .errors import ConfigInvalid
from .graphgen import Case, GenParams, generate
from .model import ObjectGraph
from .registry import PidRegistry
from .resolver import RequestTrace, ResolvedGraph, Resolver
from .server import ServiceThread, collection_handler, registry_handler

logger = logging.getLogger(__name__)

OBJECT_OF_KIND = {
    RequestKind.REGISTER_PID: "pid",
    RequestKind.CREATE_COLLECTION: "collection",
    RequestKind.ADD_MEMBER: "member",
}


@dataclass
class BenchConfig:
    mode: str = "sim"
    cases: Sequence[Case] = (Case.G1, Case.G2, Case.G3, Case.G4)
    strategies: Sequence[Strategy] = (Strategy.I1, Strategy.I2, Strategy.I3)
    collections: int = 100
    members: int = 4
    max_out_degree: int = 4
    edge_density: float = 0.05
    per_case: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    seeds: Sequence[int] = (1,)
    num_roots: int | None = 1
    resolve_mode: str = "dedup"
    max_depth: int | None = None
    cost_model: str | None = None
    jitter_fraction: float = DEFAULT_JITTER_FRACTION
    registry_url: str | None = None
    collections_url: str | None = None
    stage_delays: str | Mapping | None = "calibrated"
    delay_scale: float = 1.0
    warmup_fraction: float | None = None
    parallel: bool = False

    def __post_init__(self):
        if self.mode not in ("sim", "real"):
            raise ConfigInvalid(f"mode must be 'sim' or 'real', got {self.mode!r}")
        try:
            self.cases = tuple(Case.parse(c) for c in self.cases)
            self.strategies = tuple(Strategy.parse(s) for s in self.strategies)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.cases or not self.strategies or not self.seeds:
            raise ConfigInvalid("cases, strategies and seeds must be non-empty")
        if bool(self.registry_url) != bool(self.collections_url):
            raise ConfigInvalid("give both service URLs or neither")
        if self.parallel and self.mode != "sim":
            raise ConfigInvalid("parallel cells are only allowed in sim mode")
        for key, over in self.per_case.items():
            Case.parse(key)
            unknown = set(over) - {"collections", "members", "max_out_degree", "edge_density", "num_roots"}
            if unknown:
                raise ConfigInvalid(f"unknown per-case keys for {key}: {sorted(unknown)}")
        if self.warmup_fraction is None:
            self.warmup_fraction = 0.05 if self.mode == "real" else 0.0
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigInvalid("warmup_fraction must be in [0, 1)")

    @classmethod
    def from_mapping(cls, data: Mapping | None, **overrides) -> "BenchConfig":
        data = dict(data or {})
        scale = data.pop("scale", None)
        if scale:
            data.setdefault("collections", scale.get("collections", scale.get("C", cls.collections)))
            data.setdefault("members", scale.get("members", scale.get("M", cls.members)))
        services = data.pop("services", None)
        if services:
            data.setdefault("registry_url", services.get("registry"))
            data.setdefault("collections_url", services.get("collections"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    @classmethod
    def load(cls, path, **overrides) -> "BenchConfig":
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigInvalid(f"cannot read bench config {path}: {exc}") from exc
        return cls.from_mapping(data, **overrides)

    def gen_params(self, case: Case, seed: int, tag: str = "") -> GenParams:
        over = dict(self.per_case.get(case.value, self.per_case.get(case.value.lower(), {})))
        return GenParams(
            case=case,
            num_collections=int(over.get("collections", self.collections)),
            members_per_collection=int(over.get("members", self.members)),
            max_backbone_out_degree=int(over.get("max_out_degree", self.max_out_degree)),
            edge_density=float(over.get("edge_density", self.edge_density)),
            seed=seed,
            num_roots=over.get("num_roots", self.num_roots),
            tag=tag,
        )


@dataclass
class CellResult:
    case: Case
    strategy: Strategy
    seed: int
    graph: ObjectGraph
    deposit: DepositReport
    resolved: ResolvedGraph


def _cell_seed(seed: int, case: Case, strategy: Strategy) -> int:
    ss = np.random.SeedSequence([seed & (2**63 - 1), list(Case).index(case), list(Strategy).index(strategy)])
    return int(ss.generate_state(1)[0])


def _run_cell(config: BenchConfig, case: Case, strategy: Strategy, seed: int) -> CellResult:
    with ExitStack() as stack:
        tag = ""
        if config.mode == "sim":
            calib = Calibration.load(config.cost_model)
            sampler = CostSampler(calib.model_for(case.value, strategy.value, config.jitter_fraction),
                                  _cell_seed(seed, case, strategy))
            reg_client = LocalRegistryClient(PidRegistry(), sampler)
            coll_client = LocalCollectionClient(CollectionService(), sampler)
            base = DEFAULT_COLLECTION_BASE
        elif config.registry_url:
            # shared external services: keep this cell's names apart from earlier runs
            tag = f"{case.value}{strategy.value}s{seed}-{uuid.uuid4().hex[:8]}".lower()
            reg_client = HttpRegistryClient(config.registry_url)
            coll_client = HttpCollectionClient(config.collections_url)
            base = config.collections_url
        else:
            delays = _stage_delays(config, seed)
            reg_srv = stack.enter_context(ServiceThread(registry_handler(PidRegistry())))
            coll_srv = stack.enter_context(ServiceThread(collection_handler(CollectionService(delays=delays))))
            reg_client = HttpRegistryClient(reg_srv.url)
            coll_client = HttpCollectionClient(coll_srv.url)
            base = coll_srv.url

        graph = generate(config.gen_params(case, seed, tag))
        deposit = execute(plan(graph, strategy, base), reg_client, coll_client)
        resolver = Resolver(reg_client, coll_client)
        resolved = resolver.resolve_provenance([r.ref for r in graph.roots], config.resolve_mode, config.max_depth)
        logger.info("cell %s/%s seed=%d: %d deposit actions, %d resolve requests",
                    case.value, strategy.value, seed, len(deposit.rows), len(resolved.traces))
        return CellResult(case, strategy, seed, graph, deposit, resolved)


def _stage_delays(config: BenchConfig, seed: int) -> StageDelays | None:
    source = config.stage_delays
    if source in (None, "none"):
        return None
    if source == "calibrated":
        source = Calibration.load(config.cost_model).stage_delays()
    elif isinstance(source, str):
        source = yaml.safe_load(Path(source).read_text())
    return StageDelays.from_config(source, scale=config.delay_scale, seed=seed)


# -- aggregation ---------------------------------------------------------------

@dataclass
class CommStats:
    mean_us: dict[RequestKind, float | None]
    counted: dict[RequestKind, int]
    negative: dict[RequestKind, int]


def compute_communication(traces: Sequence[RequestTrace], kinds=RESOLVE_KINDS) -> CommStats:
    """Per-kind mean of ``client - server``; negative samples are counted and left out."""
    sums = {k: 0 for k in kinds}
    counted = {k: 0 for k in kinds}
    negative = {k: 0 for k in kinds}
    for t in traces:
        if t.kind not in sums:
            continue
        comm = t.client_us - t.server_us
        if comm < 0:
            negative[t.kind] += 1
            logger.warning("negative communication cost on request %d (%s): %d us", t.seq, t.target, comm)
            continue
        sums[t.kind] += comm
        counted[t.kind] += 1
    means = {k: (round(sums[k] / counted[k], 3) if counted[k] else None) for k in kinds}
    return CommStats(means, counted, negative)


def _mean(values) -> float | None:
    values = list(values)
    return round(sum(values) / len(values), 3) if values else None


@dataclass
class CellReport:
    case: Case
    strategy: Strategy
    volumes: dict[RequestKind, int]
    server_mean: dict[RequestKind, float | None]
    client_mean: dict[RequestKind, float | None]
    comm: CommStats
    deposit_counts: dict[RequestKind, int]
    deposit_client_mean: dict[RequestKind, float | None]
    deposit_server_mean: dict[RequestKind, float | None]

    def total(self, means: Mapping[RequestKind, float | None]) -> float:
        return round(sum(self.volumes[k] * (means[k] or 0.0) for k in RESOLVE_KINDS), 3)

    @property
    def total_server_us(self) -> float:
        return self.total(self.server_mean)

    @property
    def total_client_us(self) -> float:
        return self.total(self.client_mean)

    @property
    def total_comm_us(self) -> float:
        return self.total(self.comm.mean_us)


def _cell_report(case, strategy, results: Sequence[CellResult], warmup: float) -> CellReport:
    measured: list[RequestTrace] = []
    volumes = {k: 0 for k in RESOLVE_KINDS}
    dep_rows = []
    for r in results:
        traces = r.resolved.traces
        for t in traces:
            volumes[t.kind] += 1
        skip = int(len(traces) * warmup)
        measured.extend(traces[skip:])
        dep_rows.extend(r.deposit.rows[int(len(r.deposit.rows) * warmup):])
    n_runs = len(results)
    # volumes are per run so they stay comparable to a single traversal
    volumes = {k: v // n_runs for k, v in volumes.items()}
    server = {k: _mean(t.server_us for t in measured if t.kind is k) for k in RESOLVE_KINDS}
    client = {k: _mean(t.client_us for t in measured if t.kind is k) for k in RESOLVE_KINDS}
    dep_counts = {k: 0 for k in DEPOSIT_KINDS}
    for r in results:
        for row in r.deposit.rows:
            dep_counts[row.kind] += 1
    dep_counts = {k: v // n_runs for k, v in dep_counts.items()}
    return CellReport(
        case, strategy, volumes, server, client, compute_communication(measured),
        dep_counts,
        {k: _mean(row.client_us for row in dep_rows if row.kind is k) for k in DEPOSIT_KINDS},
        {k: _mean(row.server_us for row in dep_rows if row.kind is k) for k in DEPOSIT_KINDS},
    )


TABLE_COLUMNS = {
    "deposit": ["case", "strategy", "object_kind", "count", "mean_client_us", "mean_server_us"],
    "server_resolve": ["case", "strategy", "kind", "volume", "mean_server_us", "total_server_us"],
    "client_resolve": ["case", "strategy", "kind", "volume", "mean_client_us", "total_client_us"],
    "communication": ["case", "strategy", "kind", "volume", "mean_comm_us", "negative"],
    "totals": ["case", "strategy", "total_server_us", "total_client_us", "total_comm_us"],
}
_INT_COLS = {"count", "volume", "negative"}
_FLOAT_COLS = {c for cols in TABLE_COLUMNS.values() for c in cols if c.endswith("_us")}


@dataclass
class BenchReport:
    cells: list[CellReport] = field(default_factory=list)
    results: list[CellResult] = field(default_factory=list, repr=False)

    def cell(self, case, strategy) -> CellReport:
        case, strategy = Case.parse(case), Strategy.parse(strategy)
        for c in self.cells:
            if c.case is case and c.strategy is strategy:
                return c
        raise KeyError((case, strategy))

    def tables(self) -> dict[str, list[list]]:
        out = {name: [] for name in TABLE_COLUMNS}
        for c in self.cells:
            key = [c.case.value, c.strategy.value]
            for k in DEPOSIT_KINDS:
                out["deposit"].append(key + [OBJECT_OF_KIND[k], c.deposit_counts[k],
                                             c.deposit_client_mean[k], c.deposit_server_mean[k]])
            for k in RESOLVE_KINDS:
                v = c.volumes[k]
                s, cl, cm = c.server_mean[k], c.client_mean[k], c.comm.mean_us[k]
                out["server_resolve"].append(key + [k.value, v, s, round(v * (s or 0.0), 3)])
                out["client_resolve"].append(key + [k.value, v, cl, round(v * (cl or 0.0), 3)])
                out["communication"].append(key + [k.value, v, cm, c.comm.negative[k]])
            out["totals"].append(key + [c.total_server_us, c.total_client_us, c.total_comm_us])
        return out


def run_matrix(config: BenchConfig) -> BenchReport:
    jobs = [(case, strategy, seed) for case in config.cases for strategy in config.strategies
            for seed in config.seeds]
    if config.parallel:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_run_cell, [config] * len(jobs), *zip(*jobs)))
    else:
        results = [_run_cell(config, *job) for job in jobs]

    report = BenchReport(results=results)
    for case in config.cases:
        for strategy in config.strategies:
            group = [r for r in results if r.case is case and r.strategy is strategy]
            report.cells.append(_cell_report(case, strategy, group, config.warmup_fraction))
    return report


# -- output --------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def _parse(col: str, text: str):
    text = text.strip()
    if col in _INT_COLS:
        return int(text)
    if col in _FLOAT_COLS:
        return None if text in ("", "N/A") else float(text)
    return text


CSV_FILES = {
    "deposit": "deposit.csv",
    "server_resolve": "server_resolve.csv",
    "client_resolve": "client_resolve.csv",
    "communication": "communication.csv",
    "totals": "totals.csv",
}

_MD_TITLES = {
    "deposit": "Deposited objects",
    "server_resolve": "Resolve workload, server side",
    "client_resolve": "Resolve workload, client side",
    "communication": "Communication cost (client minus server)",
    "totals": "Totals per cell",
}


def _markdown(tables) -> str:
    lines = ["# Benchmark summary", "", "All durations in microseconds; empty cells mean no requests of that kind.", ""]
    for name, rows in tables.items():
        cols = TABLE_COLUMNS[name]
        lines += [f"## {_MD_TITLES[name]}", "", "| " + " | ".join(cols) + " |",
                  "|" + "|".join("---" for _ in cols) + "|"]
        lines += ["| " + " | ".join(_fmt(v) for v in row) + " |" for row in rows]
        lines.append("")
    lines += _pivot_deposit(tables["deposit"])
    return "\n".join(lines)


def _pivot_deposit(rows) -> list[str]:
    """Object kind x case counts, one block per strategy."""
    cases = sorted({r[0] for r in rows})
    strategies = sorted({r[1] for r in rows})
    out = []
    for s in strategies:
        out += [f"### Deposit counts, {s}", "", "| object | " + " | ".join(cases) + " |",
                "|---|" + "|".join("---" for _ in cases) + "|"]
        for obj in ("pid", "collection", "member"):
            counts = {r[0]: r[3] for r in rows if r[1] == s and r[2] == obj}
            out.append(f"| {obj} | " + " | ".join(str(counts.get(c, "")) for c in cases) + " |")
        out.append("")
    return out


def emit_report(report: BenchReport, out_dir, formats=("csv", "markdown")) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = report.tables()
    written = []
    if "csv" in formats:
        for name, filename in CSV_FILES.items():
            path = out_dir / filename
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TABLE_COLUMNS[name])
                for row in tables[name]:
                    w.writerow([_fmt(v) for v in row])
            written.append(path)
    if "markdown" in formats:
        path = out_dir / "summary.md"
        path.write_text(_markdown(tables))
        written.append(path)
    return written


def read_csv_tables(out_dir) -> dict[str, list[list]]:
    out = {}
    for name, filename in CSV_FILES.items():
        with open(Path(out_dir) / filename, newline="") as fh:
            rows = list(csv.reader(fh))
        cols = rows[0]
        if cols != TABLE_COLUMNS[name]:
            raise ValueError(f"{filename}: unexpected header {cols}")
        out[name] = [[_parse(c, v) for c, v in zip(cols, row)] for row in rows[1:]]
    return out


def parse_markdown_tables(text: str) -> dict[str, list[list]]:
    """Read the tidy tables of ``summary.md`` back into typed rows."""
    by_title = {v: k for k, v in _MD_TITLES.items()}
    out, current, cols = {}, None, None
    for line in text.splitlines():
        if line.startswith("## "):
            current = by_title.get(line[3:].strip())
            cols = None
            if current:
                out[current] = []
            continue
        if line.startswith("### "):
            current = None
            continue
        if current is None or not line.startswith("|"):
            continue
        cells = [c.strip() for c in line.strip().strip("|").split("|")]
        if cols is None:
            cols = cells
        elif set("".join(cells)) <= set("-:"):
            continue
        else:
            out[current].append([_parse(c, v) for c, v in zip(cols, cells)])
    return out

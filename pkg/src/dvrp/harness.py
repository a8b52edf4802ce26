"""Experiment matrix, report table, and CSV/SVG emission.

One bench run executes, per repetition: stage 1+2 for every
(clusterer, constructor) pair, and the full three-stage pipeline for every
(clusterer, constructor, improver, budget) triple, the no-clustering rows
serving as the improver-matched baselines. Seeds derive from base_seed so a
rerun reproduces every cost bit-for-bit; wall time is quantized to 0.1 s so
the emitted CSV is stable too.
"""
from __future__ import annotations

import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .clustering import CLUSTER_METHODS, ClusteringConfig
from .construction import CONSTRUCTION_METHODS, ConstructionConfig
from .dynamics import PipelineConfig, solve
from .improvement import IMPROVEMENT_METHODS, ImprovementConfig
from .instances import IoError
from .model import Infeasible, InputError, Instance, Plan, route_cost

MAX_EXPECTED_STD = 5.3        # flag threshold for per-combination variability

CSV_HEADER = ("clusterer,constructor,improver,budget_s,rep,seed,"
              "cost,wall_time_s,improvement_pct,status")


@dataclass(frozen=True)
class ExperimentMatrix:
    clusterers: tuple[str, ...] = ("none", "kmeans", "gmm", "birch")
    constructors: tuple[str, ...] = ("savings", "pca", "gca")
    improvers: tuple[str, ...] = ("gls", "sa", "tabu")
    budgets: tuple[float, ...] = (0.5, 1.0, 2.0, 5.0, 50.0)
    repetitions: int = 10
    base_seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for c in self.clusterers:
            if c not in CLUSTER_METHODS:
                raise ValueError(f"unknown clusterer {c!r}")
        for c in self.constructors:
            if c not in CONSTRUCTION_METHODS:
                raise ValueError(f"unknown constructor {c!r}")
        for imp in self.improvers:
            if imp not in IMPROVEMENT_METHODS or imp == "none":
                raise ValueError(f"unknown improver {imp!r}")


@dataclass(frozen=True)
class ReportRow:
    clusterer: str
    constructor: str
    improver: str                  # "none" for construction-only rows
    budget_s: float
    rep: int
    seed: int
    cost: float | None             # None when the run errored
    wall_time_s: float             # quantized to 0.1 s
    improvement_pct: float | None  # vs the no-clustering baseline, 2 decimals
    status: str                    # "ok" or the error class name


@dataclass(frozen=True)
class Aggregate:
    clusterer: str
    constructor: str
    improver: str
    budget_s: float
    runs: int
    mean: float
    minimum: float
    std: float
    flagged: bool                  # std above MAX_EXPECTED_STD


@dataclass(frozen=True)
class ReportTable:
    rows: tuple[ReportRow, ...]

    def aggregates(self) -> list[Aggregate]:
        groups: dict[tuple, list[float]] = {}
        order: list[tuple] = []
        for r in self.rows:
            key = (r.clusterer, r.constructor, r.improver, r.budget_s)
            if key not in groups:
                groups[key] = []
                order.append(key)
            if r.cost is not None:
                groups[key].append(r.cost)
        out = []
        for key in order:
            costs = groups[key]
            if not costs:
                continue
            std = statistics.pstdev(costs) if len(costs) > 1 else 0.0
            out.append(Aggregate(
                clusterer=key[0], constructor=key[1], improver=key[2],
                budget_s=key[3], runs=len(costs),
                mean=sum(costs) / len(costs), minimum=min(costs), std=std,
                flagged=std > MAX_EXPECTED_STD))
        return out


def improvement_percent(baseline_cost: float, cost: float) -> float:
    """100 * (baseline - cost) / baseline; negative when cost regressed."""
    if baseline_cost <= 0:
        raise ValueError("baseline cost must be positive")
    return 100.0 * (baseline_cost - cost) / baseline_cost


def _pipeline(clusterer: str, constructor: str, improver: str,
              budget_s: float, seed: int) -> PipelineConfig:
    return PipelineConfig(
        clustering=ClusteringConfig(method=clusterer, seed=seed),
        construction=ConstructionConfig(method=constructor),
        improvement=ImprovementConfig(method=improver, time_limit_s=budget_s,
                                      seed=seed),
    )


def _run_job(args: tuple) -> tuple:
    """(instance, clusterer, constructor, improver, budget, rep, seed) ->
    (cost, wall, status). Top-level so worker processes can unpickle it."""
    instance, clusterer, constructor, improver, budget, rep, seed = args
    config = _pipeline(clusterer, constructor, improver, budget, seed)
    t0 = time.monotonic()
    try:
        result = solve(instance, config)
        cost, status = result.plan.total_cost, "ok"
    except (Infeasible, InputError) as exc:
        cost, status = None, type(exc).__name__
    wall = round(time.monotonic() - t0, 1)
    return cost, wall, status


def run_experiment_matrix(
    instance: Instance,
    matrix: ExperimentMatrix,
    workers: int = 1,
) -> ReportTable:
    """Static t=0 solves over the full matrix; rows never abort the run."""
    jobs: list[tuple] = []
    kinds: list[tuple] = []        # mirrors jobs: ("pair"|"triple"|"base", key)

    for constructor in matrix.constructors:
        # hidden no-clustering construction baselines for the pair rows
        jobs.append((instance, "none", constructor, "none", 0.0, 0,
                     matrix.base_seed))
        kinds.append(("base", constructor))
    for clusterer in matrix.clusterers:
        if clusterer == "none":
            continue
        for constructor in matrix.constructors:
            for rep in range(matrix.repetitions):
                seed = matrix.base_seed + rep
                jobs.append((instance, clusterer, constructor, "none", 0.0,
                             rep, seed))
                kinds.append(("pair", None))
    for clusterer in matrix.clusterers:
        for constructor in matrix.constructors:
            for improver in matrix.improvers:
                for budget in matrix.budgets:
                    for rep in range(matrix.repetitions):
                        seed = matrix.base_seed + rep
                        jobs.append((instance, clusterer, constructor,
                                     improver, budget, rep, seed))
                        kinds.append(("triple", None))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]

    pair_base: dict[str, float | None] = {}
    rows: list[ReportRow] = []
    for (kind, key), job, (cost, wall, status) in zip(kinds, jobs, results):
        _, clusterer, constructor, improver, budget, rep, seed = job
        if kind == "base":
            pair_base[key] = cost
            continue
        rows.append(ReportRow(
            clusterer=clusterer, constructor=constructor, improver=improver,
            budget_s=budget, rep=rep, seed=seed, cost=cost,
            wall_time_s=wall, improvement_pct=None, status=status))

    # baselines for the triple rows: the matching no-clustering rows
    triple_base = {
        (r.constructor, r.improver, r.budget_s, r.rep): r.cost
        for r in rows if r.clusterer == "none"
    }

    final: list[ReportRow] = []
    for r in rows:
        pct = None
        if r.cost is not None and r.clusterer != "none":
            base = (pair_base.get(r.constructor) if r.improver == "none"
                    else triple_base.get((r.constructor, r.improver,
                                          r.budget_s, r.rep)))
            if base is not None:
                pct = round(improvement_percent(base, r.cost), 2)
        final.append(ReportRow(
            clusterer=r.clusterer, constructor=r.constructor,
            improver=r.improver, budget_s=r.budget_s, rep=r.rep, seed=r.seed,
            cost=r.cost, wall_time_s=r.wall_time_s, improvement_pct=pct,
            status=r.status))
    return ReportTable(rows=tuple(final))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _format_row(r: ReportRow) -> str:
    cost = "" if r.cost is None else repr(r.cost)
    pct = "" if r.improvement_pct is None else f"{r.improvement_pct:.2f}"
    return (f"{r.clusterer},{r.constructor},{r.improver},{r.budget_s!r},"
            f"{r.rep},{r.seed},{cost},{r.wall_time_s:.1f},{pct},{r.status}")


def format_csv(table: ReportTable) -> str:
    lines = [CSV_HEADER]
    lines.extend(_format_row(r) for r in table.rows)
    return "\n".join(lines) + "\n"


def emit_csv(table: ReportTable, path: str | Path) -> None:
    try:
        Path(path).write_text(format_csv(table))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def parse_csv(path: str | Path) -> ReportTable:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise InputError(f"{path}: unexpected CSV header")
    rows = []
    for line in lines[1:]:
        f = line.split(",")
        if len(f) != 10:
            raise InputError(f"{path}: bad row {line!r}")
        rows.append(ReportRow(
            clusterer=f[0], constructor=f[1], improver=f[2],
            budget_s=float(f[3]), rep=int(f[4]), seed=int(f[5]),
            cost=float(f[6]) if f[6] else None,
            wall_time_s=float(f[7]),
            improvement_pct=float(f[8]) if f[8] else None,
            status=f[9]))
    return ReportTable(rows=tuple(rows))


def format_aggregates(table: ReportTable) -> str:
    lines = ["clusterer  constructor  improver  budget_s  runs  "
             "mean      min       std    "]
    for a in table.aggregates():
        flag = "  <-- std above 5.3" if a.flagged else ""
        lines.append(
            f"{a.clusterer:<9}  {a.constructor:<11}  {a.improver:<8}  "
            f"{a.budget_s:<8g}  {a.runs:<4}  {a.mean:<8.1f}  {a.minimum:<8.1f}  "
            f"{a.std:<5.2f}{flag}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf")


def format_svg(plan: Plan, instance: Instance) -> str:
    """Route map: depot square, demand-scaled customer circles, one polyline
    per route, legend with per-route cost."""
    by_id = {c.id: c for c in instance.all_customers()}
    planned = [cid for r in plan.routes for cid in r.visits]
    customers = {cid: by_id[cid] for cid in planned}
    pts = [instance.depot] + [c.location for c in customers.values()]
    min_x = min(p.x for p in pts)
    max_x = max(p.x for p in pts)
    min_y = min(p.y for p in pts)
    max_y = max(p.y for p in pts)
    span = max(max_x - min_x, max_y - min_y, 1.0)
    size, margin = 640.0, 40.0
    scale = (size - 2 * margin) / span

    def sx(x: float) -> float:
        return margin + (x - min_x) * scale

    def sy(y: float) -> float:
        return size - margin - (y - min_y) * scale   # y grows upward

    from .model import build_distance_matrix
    matrix = build_distance_matrix(instance.depot,
                                   list(customers.values()))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<rect width="{size:.0f}" height="{size:.0f}" fill="white"/>',
    ]
    legend_y = 20.0
    for i, route in enumerate(plan.routes):
        color = _PALETTE[i % len(_PALETTE)]
        coords = [route.start] + [customers[c].location for c in route.visits] \
            + [route.end]
        points = " ".join(f"{sx(p.x):.2f},{sy(p.y):.2f}" for p in coords)
        parts.append(f'<polyline points="{points}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        cost = route_cost(route, matrix)
        parts.append(f'<text x="12" y="{legend_y:.0f}" font-size="12" '
                     f'fill="{color}">vehicle {route.vehicle_id}: '
                     f'{cost:.1f}</text>')
        legend_y += 16.0
    for c in customers.values():
        r = 2.0 + c.demand
        parts.append(f'<circle cx="{sx(c.location.x):.2f}" '
                     f'cy="{sy(c.location.y):.2f}" r="{r:.2f}" '
                     f'fill="#444" fill-opacity="0.6"/>')
    half = 6.0
    parts.append(f'<rect x="{sx(instance.depot.x) - half:.2f}" '
                 f'y="{sy(instance.depot.y) - half:.2f}" '
                 f'width="{2 * half:.0f}" height="{2 * half:.0f}" '
                 f'fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg(plan: Plan, instance: Instance, path: str | Path) -> None:
    try:
        Path(path).write_text(format_svg(plan, instance))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc

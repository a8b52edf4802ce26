"""Command line entry point: gen, solve, simulate, bench."""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import argparse

from .clustering import CLUSTER_METHODS, ClusteringConfig
from .construction import CONSTRUCTION_METHODS, ConstructionConfig
from .dynamics import PipelineConfig, simulate, solve
from .harness import (ExperimentMatrix, emit_csv, emit_svg, format_aggregates,
                      format_svg, run_experiment_matrix)
from .improvement import IMPROVEMENT_METHODS, ImprovementConfig
from .instances import (IoError, generate_instance, load_instance,
                        save_instance)
from .model import Infeasible, InputError, Point


class _Parser(argparse.ArgumentParser):
    """Bad flags are input errors (exit 3), not argparse's default exit 2."""

    def error(self, message):
        raise InputError(message)


def _parse_depot(text: str) -> Point:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"--depot expects 'x,y', got {text!r}") from exc
    return Point(x, y)


def _csv_list(text: str, allowed: tuple[str, ...], flag: str) -> tuple:
    items = tuple(t.strip() for t in text.split(",") if t.strip())
    for item in items:
        if item not in allowed:
            raise InputError(f"{flag}: unknown value {item!r}")
    if not items:
        raise InputError(f"{flag}: empty list")
    return items


def _build_parser() -> _Parser:
    parser = _Parser(prog="dvrp", description="capacitated routing toolkit")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, with_budget=True, lists=False):
        p.add_argument("--instance", required=True, help="instance JSON path")
        if lists:
            # bench accepts comma-separated lists, validated in the handler
            p.add_argument("--clusterer", default="none,kmeans,gmm,birch")
            p.add_argument("--construct", default="savings,pca,gca")
            p.add_argument("--improve", default="gls,sa,tabu")
        else:
            p.add_argument("--clusterer", default="kmeans",
                           choices=CLUSTER_METHODS)
            p.add_argument("--construct", default="savings",
                           choices=CONSTRUCTION_METHODS)
            p.add_argument("--improve", default="gls",
                           choices=IMPROVEMENT_METHODS)
        if with_budget:
            p.add_argument("--time-limit", type=float, default=1.0,
                           help="improvement budget per re-optimization, s")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--speed", type=float, default=None,
                       help="override fleet speed")
        p.add_argument("--depot", type=_parse_depot, default=None,
                       help="override depot as 'x,y'")
        p.add_argument("--out", default=None, help="output file")

    gen = sub.add_parser("gen", help="generate a random instance")
    gen.add_argument("--n", type=int, required=True, help="static customers")
    gen.add_argument("--dynamic", type=int, default=0,
                     help="customers revealed by events")
    gen.add_argument("--events", type=int, default=0, help="event count")
    gen.add_argument("--vehicles", type=int, default=4)
    gen.add_argument("--capacity", type=float, default=100.0)
    gen.add_argument("--speed", type=float, default=1.0)
    gen.add_argument("--grid", type=int, default=100)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--depot", type=_parse_depot, default=None)
    gen.add_argument("--out", required=True)

    solve_p = sub.add_parser("solve", help="solve the static t=0 problem")
    common(solve_p)
    solve_p.add_argument("--format", choices=("jsonl", "svg"),
                         default="jsonl")

    sim = sub.add_parser("simulate", help="run the event-driven simulation")
    common(sim)
    sim.add_argument("--format", choices=("jsonl", "svg"), default="jsonl")

    bench = sub.add_parser("bench", help="run the experiment matrix")
    common(bench, with_budget=False, lists=True)
    bench.add_argument("--budgets", default="0.5,1,2,5,50",
                       help="comma-separated improvement budgets, s")
    bench.add_argument("--reps", type=int, default=10)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--format", choices=("csv",), default="csv")
    return parser


def _load(args) -> "Instance":
    instance = load_instance(args.instance)
    if args.depot is not None:
        instance = dataclasses.replace(instance, depot=args.depot)
    if args.speed is not None:
        fleet = dataclasses.replace(instance.fleet, speed=args.speed)
        instance = dataclasses.replace(instance, fleet=fleet)
    return instance


def _pipeline(args) -> PipelineConfig:
    return PipelineConfig(
        clustering=ClusteringConfig(method=args.clusterer, seed=args.seed),
        construction=ConstructionConfig(method=args.construct),
        improvement=ImprovementConfig(method=args.improve,
                                      time_limit_s=args.time_limit,
                                      seed=args.seed),
    )


def _cmd_gen(args) -> int:
    try:
        instance = generate_instance(
            name=Path(args.out).stem, n_static=args.n, n_dynamic=args.dynamic,
            event_count=args.events, seed=args.seed, vehicles=args.vehicles,
            capacity=args.capacity, speed=args.speed,
            depot=args.depot if args.depot is not None else Point(50.0, 50.0),
            grid=args.grid)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    save_instance(instance, args.out)
    print(f"wrote {args.out}: {len(instance.customers)} static, "
          f"{sum(len(e.customers) for e in instance.events)} dynamic")
    return 0


def _cmd_solve(args) -> int:
    instance = _load(args)
    result = solve(instance, _pipeline(args))
    print(f"cost {result.plan.total_cost:.1f} over "
          f"{sum(1 for r in result.plan.routes if r.visits)} active routes")
    if args.out:
        if args.format == "svg":
            emit_svg(result.plan, instance, args.out)
        else:
            record = {
                "cost": result.plan.total_cost,
                "routes": [list(r.visits) for r in result.plan.routes],
            }
            _write_text(args.out, json.dumps(record) + "\n")
    return 0


def _cmd_simulate(args) -> int:
    instance = _load(args)
    result = simulate(instance, _pipeline(args))
    print(f"served {len(result.served)} customers, realized distance "
          f"{result.realized_distance:.1f}, completed t={result.completion_time:.1f}")
    if args.out:
        if args.format == "svg":
            final_plan = result.plans[-1][1]
            emit_svg(final_plan, instance, args.out)
        else:
            lines = [json.dumps(row) for row in result.trace]
            _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_bench(args) -> int:
    instance = _load(args)
    try:
        budgets = tuple(float(b) for b in args.budgets.split(",") if b)
    except ValueError as exc:
        raise InputError(f"--budgets: {exc}") from exc
    improvers = _csv_list(args.improve, IMPROVEMENT_METHODS, "--improve")
    if improvers == ("none",):
        improvers = ()             # construction-only report
    matrix = ExperimentMatrix(
        clusterers=_csv_list(args.clusterer, CLUSTER_METHODS, "--clusterer"),
        constructors=_csv_list(args.construct, CONSTRUCTION_METHODS,
                               "--construct"),
        improvers=improvers,
        budgets=budgets, repetitions=args.reps, base_seed=args.seed)
    table = run_experiment_matrix(instance, matrix, workers=args.workers)
    if args.out:
        emit_csv(table, args.out)
    print(format_aggregates(table), end="")
    return 0


def _write_text(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"gen": _cmd_gen, "solve": _cmd_solve,
                   "simulate": _cmd_simulate, "bench": _cmd_bench}[args.verb]
        return handler(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

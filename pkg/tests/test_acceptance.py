"""End-to-end quality gates for the full pipeline.

These are the release checks: feasibility at scale, monotone improvement,
oracle optimality on small instances, cost bands on the shipped dataset,
dynamic-replay behavior, budget adherence, and bit-for-bit determinism.
Budgeted runs make this module slow (~18 min end to end); everything else in
the test suite stays fast.
"""
from __future__ import annotations

import dataclasses
import time

import numpy as np
import pytest

from dvrp import (ClusteringConfig, ConstructionConfig, ConstructionProblem,
                  ImprovementConfig, Infeasible, PipelineConfig,
                  build_distance_matrix, construct_plan, generate_case2_analog,
                  generate_instance, improve_plan, kmeans_cluster, parse_csv,
                  repair_capacity, simulate, solve)
from dvrp.cli import main

from oracles import tsp_optimum
from test_construction import problem_of

CONSTRUCTORS = ("savings", "pca", "gca")
IMPROVERS = ("gls", "sa", "tabu")


def pipeline(clusterer, constructor, improver, budget=1.0, seed=0):
    return PipelineConfig(
        clustering=ClusteringConfig(method=clusterer, seed=seed),
        construction=ConstructionConfig(method=constructor),
        improvement=ImprovementConfig(method=improver, time_limit_s=budget,
                                      seed=seed))


def t0_cost(instance, clusterer, constructor, improver="none", budget=0.0,
            seed=0):
    return solve(instance, pipeline(clusterer, constructor, improver,
                                    budget, seed)).plan.total_cost


# -- 1. feasibility at scale ---------------------------------------------------

def test_every_emitted_plan_validates_at_scale():
    started = time.monotonic()
    rng = np.random.default_rng(0)
    clusterers = ("none", "kmeans", "gmm", "birch")
    improvers = ("none", "gls", "sa", "tabu")

    solved, errored = 0, 0
    for i in range(1000):
        n = int(rng.integers(6, 17))
        vehicles = int(rng.integers(2, 5))
        inst = generate_instance(
            f"fuzz{i}", n_static=n, seed=i, vehicles=vehicles,
            capacity=float(2 * n / vehicles + 4))
        config = pipeline(clusterers[i % 4], CONSTRUCTORS[i % 3],
                          improvers[i % 4], budget=0.01, seed=i)
        try:
            result = solve(inst, config)
        except Infeasible:
            errored += 1
            continue
        assert result.report.passed, f"run {i}: {result.report}"
        solved += 1
    assert solved >= 980, f"only {solved} of 1000 solves produced plans"

    simulated = 0
    for i in range(100):
        inst = generate_instance(
            f"sim{i}", n_static=int(rng.integers(6, 11)),
            n_dynamic=int(rng.integers(2, 7)),
            event_count=int(rng.integers(1, 4)), seed=5000 + i,
            vehicles=int(rng.integers(2, 4)), capacity=30.0)
        config = pipeline(clusterers[i % 4], CONSTRUCTORS[i % 3],
                          improvers[i % 4], budget=0.01, seed=i)
        result = simulate(inst, config)
        assert all(r.passed for r in result.reports)
        assert sorted(result.served) == \
            sorted(c.id for c in inst.all_customers())
        simulated += 1
    assert simulated == 100
    assert time.monotonic() - started < 600.0


# -- 2. monotone improvement ---------------------------------------------------

def test_improvement_never_regresses_on_clustered_case1(case1):
    demands = {c.id: c.demand for c in case1.customers}
    points = {c.id: c.location for c in case1.customers}
    by_id = {c.id: c for c in case1.customers}
    cap = case1.fleet.capacity

    for seed in (0, 1):
        clusters = kmeans_cluster(case1.customers, 4, seed=seed)
        clusters = repair_capacity(clusters, demands, [cap] * 4, points)
        for members in clusters.clusters:
            subset = tuple(by_id[i] for i in members)
            matrix = build_distance_matrix(case1.depot, list(subset))
            problem = ConstructionProblem(
                starts=(case1.depot,), end=case1.depot, customers=subset,
                capacities=(cap,), matrix=matrix)
            for constructor in CONSTRUCTORS:
                start = construct_plan(problem,
                                       ConstructionConfig(method=constructor))
                for improver in IMPROVERS:
                    trace: list[float] = []
                    out = improve_plan(
                        problem, start,
                        ImprovementConfig(method=improver, time_limit_s=0.05,
                                          seed=seed),
                        trace_out=trace)
                    assert out.total_cost <= start.total_cost
                    assert all(b <= a for a, b in zip(trace, trace[1:]))


# -- 3. oracle optimality -------------------------------------------------------

def test_improvers_reach_brute_force_optimum():
    hits = {m: 0 for m in IMPROVERS}
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        coords = [tuple(p) for p in rng.uniform(0, 100, (8, 2))]
        problem = problem_of(coords, [1] * 8, [10])
        start = construct_plan(problem, ConstructionConfig(method="pca"))
        optimum = tsp_optimum((0, 0), coords)
        for method in IMPROVERS:
            out = improve_plan(
                problem, start,
                ImprovementConfig(method=method, time_limit_s=2.0, seed=seed))
            assert out.total_cost >= optimum - 1e-9, \
                f"{method} seed {seed} beat the exhaustive optimum"
            if out.total_cost <= optimum * (1 + 1e-6):
                hits[method] += 1
    assert hits["gls"] >= 18, hits
    assert hits["tabu"] >= 18, hits
    assert hits["sa"] >= 16, hits


# -- 4. construction cost bands on the shipped dataset ---------------------------

CONSTRUCTION_BANDS = {"savings": 1142.7, "pca": 1189.2, "gca": 1080.1}


@pytest.mark.parametrize("constructor,center",
                         sorted(CONSTRUCTION_BANDS.items()))
def test_construction_cost_band(case1, constructor, center):
    started = time.monotonic()
    cost = t0_cost(case1, "none", constructor)
    assert time.monotonic() - started < 5.0
    assert abs(cost - center) <= 0.20 * center, \
        f"{constructor}: {cost:.1f} outside {center} +-20%"


# -- 5. clustering benefit ------------------------------------------------------

def test_clustered_savings_stays_in_band(case1):
    for seed in range(10):
        cost = t0_cost(case1, "kmeans", "savings", seed=seed)
        assert abs(cost - 949.6) <= 0.20 * 949.6, \
            f"seed {seed}: {cost:.1f} outside 949.6 +-20%"


def test_clustering_beats_unclustered_savings(case1):
    baseline = t0_cost(case1, "none", "savings")
    wins = sum(
        t0_cost(case1, "kmeans", "savings", seed=seed) < baseline
        for seed in range(10))
    assert wins >= 8, \
        f"clustered savings beat the {baseline:.1f} baseline on {wins}/10 seeds"


def test_full_pipeline_band_at_long_budget(case1):
    best = min(
        t0_cost(case1, "kmeans", "savings", "gls", budget=50.0, seed=seed)
        for seed in range(10))
    assert abs(best - 930.6) <= 0.20 * 930.6, \
        f"best-of-10: {best:.1f} outside 930.6 +-20%"


# -- 6. dynamic replay ----------------------------------------------------------

def test_case1_replay_replans_and_serves_everyone(case1):
    config = pipeline("kmeans", "savings", "gls", budget=0.25)
    result = simulate(case1, config)
    assert [t for t, _ in result.plans] == [0.0, 13.0, 31.0, 45.0, 51.0, 66.0]
    assert len(result.trace) == 6
    assert sorted(result.served) == list(range(1, 121))
    assert all(r.passed for r in result.reports)


def test_no_event_replay_realizes_plan_cost_exactly(case1):
    static_only = dataclasses.replace(case1, events=())
    config = pipeline("kmeans", "savings", "gls", budget=0.25)
    result = simulate(static_only, config)
    assert len(result.plans) == 1
    planned = result.plans[0][1].total_cost
    assert result.realized_distance == pytest.approx(planned, rel=1e-6)


# -- 7. budget adherence --------------------------------------------------------

def test_improver_wall_time_stays_within_budget():
    runs_per_budget = {0.5: 100, 1.0: 50, 2.0: 30, 5.0: 20}
    adherent = total = 0
    i = 0
    for budget, count in runs_per_budget.items():
        for _ in range(count):
            rng = np.random.default_rng(2000 + i)
            coords = [tuple(p) for p in rng.uniform(0, 100, (35, 2))]
            demands = [int(d) for d in rng.integers(1, 4, 35)]
            problem = problem_of(coords, demands,
                                 [sum(demands) / 3 + 4] * 3)
            start = construct_plan(problem, ConstructionConfig(method="pca"))
            config = ImprovementConfig(method=IMPROVERS[i % 3],
                                       time_limit_s=budget, seed=i)
            began = time.monotonic()
            improve_plan(problem, start, config)
            wall = time.monotonic() - began
            total += 1
            adherent += wall <= budget * 1.10
            i += 1
    assert total == 200
    assert adherent >= 190, f"only {adherent}/200 runs within 1.10x budget"


# -- 8. determinism -------------------------------------------------------------

def test_bench_is_byte_identical_across_runs(tmp_path):
    inst_path = tmp_path / "inst.json"
    assert main(["gen", "--n", "10", "--vehicles", "3", "--capacity", "30",
                 "--seed", "3", "--out", str(inst_path)]) == 0
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        code = main(["bench", "--instance", str(inst_path),
                     "--improve", "gls,tabu", "--budgets", "0.2",
                     "--reps", "2", "--seed", "11", "--workers", "1",
                     "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert len(parse_csv(tmp_path / "a.csv").rows) == 66


# -- generated-analog checks ------------------------------------------------------

def test_analog_solves_validate_and_improve_monotonically():
    for seed in range(3):
        inst = generate_case2_analog(seed=seed)
        constructed = solve(inst, pipeline("kmeans", "savings", "none",
                                           seed=seed))
        improved = solve(inst, pipeline("kmeans", "savings", "gls",
                                        budget=0.3, seed=seed))
        assert constructed.report.passed
        assert improved.report.passed
        assert improved.plan.total_cost <= constructed.plan.total_cost

    inst = generate_case2_analog(seed=0)
    result = simulate(inst, pipeline("kmeans", "savings", "gls", budget=0.1))
    assert sorted(result.served) == sorted(c.id for c in inst.all_customers())
    assert [t for t, _ in result.plans] == \
        [0.0] + [e.time for e in inst.events]
    assert all(r.passed for r in result.reports)


def test_analog_best_clustered_beats_worst_baseline():
    wins = 0
    for seed in range(10):
        inst = generate_case2_analog(seed=seed)
        best_clustered = min(
            t0_cost(inst, cl, co, im, budget=0.3, seed=seed)
            for cl in ("kmeans", "gmm", "birch")
            for co in CONSTRUCTORS for im in IMPROVERS)
        worst_baseline = max(
            t0_cost(inst, "none", co, im, budget=0.3, seed=seed)
            for co in CONSTRUCTORS for im in IMPROVERS)
        wins += best_clustered < worst_baseline
    assert wins >= 7, f"clustered best won on {wins}/10 seeds"

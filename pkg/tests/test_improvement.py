from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dvrp import (ConstructionConfig, ImprovementConfig, Neighborhoods,
                  construct_plan, improve_plan, validate_plan)

from test_construction import problem_of, check_valid
from oracles import tsp_optimum

IMPROVERS = ("gls", "sa", "tabu")


def random_problem(seed, n=None, vehicles=2):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(5, 12))
    coords = [tuple(p) for p in rng.uniform(0, 100, (n, 2))]
    demands = [int(d) for d in rng.integers(1, 4, n)]
    cap = float(sum(demands)) / vehicles + 4.0
    return problem_of(coords, demands, [cap] * vehicles)


def cfg(method, budget=0.15, seed=0, **kw):
    return ImprovementConfig(method=method, time_limit_s=budget, seed=seed,
                             **kw)


@pytest.mark.parametrize("method", IMPROVERS)
def test_never_worse_than_start(method):
    p = random_problem(seed=1)
    start = construct_plan(p, ConstructionConfig(method="pca"))
    out = improve_plan(p, start, cfg(method))
    assert out.total_cost <= start.total_cost + 1e-9
    check_valid(p, out)


@pytest.mark.parametrize("method", IMPROVERS)
def test_incumbent_trace_non_increasing(method):
    p = random_problem(seed=2)
    start = construct_plan(p, ConstructionConfig(method="pca"))
    trace: list[float] = []
    improve_plan(p, start, cfg(method), trace_out=trace)
    assert trace, "incumbent trace must record at least the start"
    assert trace[0] == pytest.approx(start.total_cost)
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


@pytest.mark.parametrize("method", IMPROVERS)
def test_deterministic_under_seed(method):
    p = random_problem(seed=3)
    start = construct_plan(p, ConstructionConfig(method="pca"))
    # generous budgets: both runs exhaust the same move sequence
    a = improve_plan(p, start, cfg(method, budget=0.4, seed=5))
    b = improve_plan(p, start, cfg(method, budget=0.4, seed=5))
    assert a == b


def test_method_none_returns_plan_unchanged():
    p = random_problem(seed=4)
    start = construct_plan(p, ConstructionConfig(method="savings"))
    assert improve_plan(p, start, cfg("none")) is start


def test_finds_square_optimum():
    coords = [(0, 0), (10, 0), (10, 10), (0, 10)]
    p = problem_of(coords, [1] * 4, [10], depot=(5.0, 5.0))
    # pca's nearest-first order crosses the square; improvement must uncross
    start = construct_plan(p, ConstructionConfig(method="pca"))
    opt = tsp_optimum((5, 5), coords)
    for method in IMPROVERS:
        out = improve_plan(p, start, cfg(method, budget=0.3))
        assert out.total_cost == pytest.approx(opt)


def test_intra_only_keeps_route_membership():
    p = random_problem(seed=6, n=10, vehicles=2)
    start = construct_plan(p, ConstructionConfig(method="pca"))
    before = [set(r.visits) for r in start.routes]
    out = improve_plan(
        p, start, cfg("gls", budget=0.2,
                      neighborhoods=Neighborhoods.intra_only()))
    after = [set(r.visits) for r in out.routes]
    assert before == after
    assert out.total_cost <= start.total_cost + 1e-9


def test_tabu_zero_tenure_still_improves():
    p = random_problem(seed=7)
    start = construct_plan(p, ConstructionConfig(method="pca"))
    out = improve_plan(p, start, cfg("tabu", tabu_tenure=0))
    assert out.total_cost <= start.total_cost + 1e-9
    check_valid(p, out)


def test_single_customer_terminates_quickly():
    p = problem_of([(5, 5)], [1], [10])
    start = construct_plan(p, ConstructionConfig(method="savings"))
    t0 = time.monotonic()
    for method in IMPROVERS:
        out = improve_plan(p, start, cfg(method, budget=5.0))
        assert out.total_cost == pytest.approx(start.total_cost)
    assert time.monotonic() - t0 < 5.0   # degenerate search exits early


@pytest.mark.parametrize("method", IMPROVERS)
def test_respects_wall_clock_budget(method):
    p = random_problem(seed=8, n=30, vehicles=3)
    start = construct_plan(p, ConstructionConfig(method="pca"))
    budget = 0.3
    t0 = time.monotonic()
    improve_plan(p, start, cfg(method, budget=budget))
    assert time.monotonic() - t0 <= budget * 1.5 + 0.05


@given(st.integers(0, 5_000), st.sampled_from(IMPROVERS))
@settings(max_examples=12, deadline=None)
def test_improved_plans_stay_feasible(seed, method):
    p = random_problem(seed=seed)
    start = construct_plan(p, ConstructionConfig(method="pca"))
    out = improve_plan(p, start, cfg(method, budget=0.05, seed=seed))
    check_valid(p, out)
    assert out.total_cost <= start.total_cost + 1e-9

"""Stage 3: metaheuristic route improvement under a wall-clock budget.

Routes live as index lists over an extended matrix: 0 is the terminal,
1..n the customers, n+1..n+m the vehicle start positions. Four move
families (intra-route 2-opt and or-opt, inter-route relocate and exchange)
share one delta/apply/edge implementation; guided local search, simulated
annealing, and tabu search drive them. Every driver returns the best
solution it has verified, never worse than its input.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass

from .model import Plan, Route, make_plan
from .construction import ConstructionProblem

IMPROVEMENT_METHODS = ("none", "gls", "sa", "tabu")

SA_COOLING_INTERVAL = 100      # temperature multiplier applied every 100 moves
_IMPROVE_EPS = 1e-9
_TIME_CHECK_MASK = 0x0FFF     # deadline polled every 4096 scanned candidates


@dataclass(frozen=True)
class Neighborhoods:
    two_opt: bool = True
    or_opt: bool = True
    relocate: bool = True
    exchange: bool = True

    @classmethod
    def intra_only(cls) -> "Neighborhoods":
        return cls(relocate=False, exchange=False)


@dataclass(frozen=True)
class ImprovementConfig:
    method: str = "gls"                    # none | gls | sa | tabu
    time_limit_s: float = 1.0
    seed: int = 0
    gls_alpha: float = 0.1
    sa_initial_temp_fraction: float = 0.1
    sa_cooling: float = 0.95
    tabu_tenure: int = 20
    tabu_max_stall: int = 2000
    neighborhoods: Neighborhoods = Neighborhoods()

    def __post_init__(self):
        if self.method not in IMPROVEMENT_METHODS:
            raise ValueError(f"unknown improvement method {self.method!r}")
        if self.time_limit_s < 0:
            raise ValueError("time_limit_s must be non-negative")


class _OutOfTime(Exception):
    pass


# ---------------------------------------------------------------------------
# Shared move machinery
# ---------------------------------------------------------------------------

def _delta_of(move: tuple, tours: list[list[int]], M: list[list[float]]) -> float:
    kind = move[0]
    if kind == "t":
        _, r, i, j = move
        t = tours[r]
        return (M[t[i - 1]][t[j]] + M[t[i]][t[j + 1]]
                - M[t[i - 1]][t[i]] - M[t[j]][t[j + 1]])
    if kind == "o":
        _, r, i, length, j = move
        t = tours[r]
        a, b, c, e = t[i - 1], t[i], t[i + length - 1], t[i + length]
        x, y = t[j], t[j + 1]
        return (M[a][e] - M[a][b] - M[c][e]) + (M[x][b] + M[c][y] - M[x][y])
    if kind == "r":
        _, r, i, s, j = move
        tr, ts = tours[r], tours[s]
        c = tr[i]
        return ((M[tr[i - 1]][tr[i + 1]] - M[tr[i - 1]][c] - M[c][tr[i + 1]])
                + (M[ts[j]][c] + M[c][ts[j + 1]] - M[ts[j]][ts[j + 1]]))
    _, r, i, s, j = move
    tr, ts = tours[r], tours[s]
    cr, cs = tr[i], ts[j]
    return ((M[tr[i - 1]][cs] + M[cs][tr[i + 1]]
             - M[tr[i - 1]][cr] - M[cr][tr[i + 1]])
            + (M[ts[j - 1]][cr] + M[cr][ts[j + 1]]
               - M[ts[j - 1]][cs] - M[cs][ts[j + 1]]))


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a <= b else (b, a)


def _edges_of(move: tuple, tours: list[list[int]]) -> tuple[list, list]:
    """(removed, added) edge lists, endpoints normalized."""
    kind = move[0]
    if kind == "t":
        _, r, i, j = move
        t = tours[r]
        removed = [_edge(t[i - 1], t[i]), _edge(t[j], t[j + 1])]
        added = [_edge(t[i - 1], t[j]), _edge(t[i], t[j + 1])]
    elif kind == "o":
        _, r, i, length, j = move
        t = tours[r]
        removed = [_edge(t[i - 1], t[i]), _edge(t[i + length - 1], t[i + length]),
                   _edge(t[j], t[j + 1])]
        added = [_edge(t[i - 1], t[i + length]), _edge(t[j], t[i]),
                 _edge(t[i + length - 1], t[j + 1])]
    elif kind == "r":
        _, r, i, s, j = move
        tr, ts = tours[r], tours[s]
        c = tr[i]
        removed = [_edge(tr[i - 1], c), _edge(c, tr[i + 1]), _edge(ts[j], ts[j + 1])]
        added = [_edge(tr[i - 1], tr[i + 1]), _edge(ts[j], c), _edge(c, ts[j + 1])]
    else:
        _, r, i, s, j = move
        tr, ts = tours[r], tours[s]
        cr, cs = tr[i], ts[j]
        removed = [_edge(tr[i - 1], cr), _edge(cr, tr[i + 1]),
                   _edge(ts[j - 1], cs), _edge(cs, ts[j + 1])]
        added = [_edge(tr[i - 1], cs), _edge(cs, tr[i + 1]),
                 _edge(ts[j - 1], cr), _edge(cr, ts[j + 1])]
    return removed, added


def _apply(move: tuple, tours: list[list[int]], loads: list[float],
           dem: list[float]) -> None:
    kind = move[0]
    if kind == "t":
        _, r, i, j = move
        t = tours[r]
        t[i:j + 1] = reversed(t[i:j + 1])
    elif kind == "o":
        _, r, i, length, j = move
        t = tours[r]
        chain = t[i:i + length]
        del t[i:i + length]
        at = j + 1 if j < i else j + 1 - length
        t[at:at] = chain
    elif kind == "r":
        _, r, i, s, j = move
        c = tours[r].pop(i)
        tours[s].insert(j + 1, c)
        loads[r] -= dem[c]
        loads[s] += dem[c]
    else:
        _, r, i, s, j = move
        cr, cs = tours[r][i], tours[s][j]
        tours[r][i], tours[s][j] = cs, cr
        loads[r] += dem[cs] - dem[cr]
        loads[s] += dem[cr] - dem[cs]


def _iter_moves(
    tours: list[list[int]],
    M: list[list[float]],
    dem: list[float],
    caps: list[float],
    loads: list[float],
    neigh: Neighborhoods,
    deadline: float,
):
    """Yield (delta, move) over every capacity-feasible move, fixed order."""
    counter = 0
    m = len(tours)
    for r in range(m):
        t = tours[r]
        lt = len(t)
        if neigh.two_opt:
            for i in range(1, lt - 2):
                for j in range(i + 1, lt - 1):
                    counter += 1
                    if counter & _TIME_CHECK_MASK == 0 and time.monotonic() > deadline:
                        raise _OutOfTime
                    move = ("t", r, i, j)
                    yield _delta_of(move, tours, M), move
        if neigh.or_opt:
            for length in (1, 2, 3):
                for i in range(1, lt - length):
                    for j in (*range(0, i - 1), *range(i + length, lt - 1)):
                        counter += 1
                        if counter & _TIME_CHECK_MASK == 0 and time.monotonic() > deadline:
                            raise _OutOfTime
                        move = ("o", r, i, length, j)
                        yield _delta_of(move, tours, M), move
    if neigh.relocate:
        for r in range(m):
            tr = tours[r]
            for i in range(1, len(tr) - 1):
                c = tr[i]
                for s in range(m):
                    if s == r or loads[s] + dem[c] > caps[s] + _IMPROVE_EPS:
                        continue
                    for j in range(len(tours[s]) - 1):
                        counter += 1
                        if counter & _TIME_CHECK_MASK == 0 and time.monotonic() > deadline:
                            raise _OutOfTime
                        move = ("r", r, i, s, j)
                        yield _delta_of(move, tours, M), move
    if neigh.exchange:
        for r in range(m):
            tr = tours[r]
            for s in range(r + 1, m):
                ts = tours[s]
                for i in range(1, len(tr) - 1):
                    for j in range(1, len(ts) - 1):
                        cr, cs = tr[i], ts[j]
                        if (loads[r] - dem[cr] + dem[cs] > caps[r] + _IMPROVE_EPS
                                or loads[s] - dem[cs] + dem[cr] > caps[s] + _IMPROVE_EPS):
                            continue
                        counter += 1
                        if counter & _TIME_CHECK_MASK == 0 and time.monotonic() > deadline:
                            raise _OutOfTime
                        move = ("x", r, i, s, j)
                        yield _delta_of(move, tours, M), move


def _tour_cost(tours: list[list[int]], M: list[list[float]]) -> float:
    total = 0.0
    for t in tours:
        for a, b in zip(t, t[1:]):
            total += M[a][b]
    return total


class _Incumbent:
    """Tracks the true-cost best solution across a search run."""

    def __init__(self, tours: list[list[int]], E: list[list[float]],
                 trace: list[float] | None):
        self.E = E
        self.cur = _tour_cost(tours, E)
        self.best_cost = self.cur
        self.best_tours = [list(t) for t in tours]
        self.trace = trace
        if trace is not None:
            trace.append(self.best_cost)

    def moved(self, d_true: float, tours: list[list[int]]) -> None:
        self.cur += d_true
        if self.cur < self.best_cost - _IMPROVE_EPS:
            exact = _tour_cost(tours, self.E)
            self.cur = exact
            if exact < self.best_cost - _IMPROVE_EPS:
                self.best_cost = exact
                self.best_tours = [list(t) for t in tours]
                if self.trace is not None:
                    self.trace.append(exact)


def _descend(
    tours: list[list[int]],
    loads: list[float],
    dem: list[float],
    caps: list[float],
    M: list[list[float]],
    neigh: Neighborhoods,
    deadline: float,
    tracker: _Incumbent | None = None,
) -> bool:
    """Best-improvement descent on M. True when locally optimal, False on timeout."""
    while True:
        if time.monotonic() > deadline:
            return False
        best_delta, best_move = -_IMPROVE_EPS, None
        try:
            for delta, move in _iter_moves(tours, M, dem, caps, loads, neigh, deadline):
                if delta < best_delta:
                    best_delta, best_move = delta, move
        except _OutOfTime:
            return False
        if best_move is None:
            return True
        d_true = _delta_of(best_move, tours, tracker.E) if tracker else 0.0
        _apply(best_move, tours, loads, dem)
        if tracker:
            tracker.moved(d_true, tours)


# ---------------------------------------------------------------------------
# Extended-matrix state
# ---------------------------------------------------------------------------

class _State:
    def __init__(self, problem: ConstructionProblem, plan: Plan):
        matrix = problem.matrix
        n = len(matrix.ids)
        m = problem.m
        size = n + 1 + m
        E = matrix.dist.tolist()
        for row in E:
            row.extend([0.0] * m)
        for _ in range(m):
            E.append([0.0] * size)
        for v, sp in enumerate(problem.starts):
            for j, pt in enumerate(matrix.points):
                d = math.hypot(sp.x - pt.x, sp.y - pt.y)
                E[n + 1 + v][j] = E[j][n + 1 + v] = d
        self.problem = problem
        self.n, self.m = n, m
        self.E = E
        self.dem = [0.0] + [0.0] * n + [0.0] * m
        for cid in matrix.ids:
            self.dem[matrix.idx(cid)] = next(
                c.demand for c in problem.customers if c.id == cid)
        self.caps = list(problem.capacities)
        self.tours = [
            [n + 1 + r.vehicle_id] + [matrix.idx(c) for c in r.visits] + [0]
            for r in plan.routes
        ]
        self.loads = [sum(self.dem[x] for x in t) for t in self.tours]

    def to_plan(self, tours: list[list[int]]) -> Plan:
        matrix = self.problem.matrix
        routes = []
        for v, t in enumerate(tours):
            visits = tuple(matrix.ids[x - 1] for x in t[1:-1])
            routes.append(Route(vehicle_id=v, start=self.problem.starts[v],
                                visits=visits, end=self.problem.end))
        return make_plan(routes, matrix)


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def _solution_edges(tours: list[list[int]]) -> list[tuple[int, int]]:
    out = []
    for t in tours:
        for a, b in zip(t, t[1:]):
            out.append(_edge(a, b))
    return out


def _run_gls(state: _State, cfg: ImprovementConfig, deadline: float,
             trace: list[float] | None) -> list[list[int]]:
    E = state.E
    E_aug = [row[:] for row in E]
    penalties: dict[tuple[int, int], int] = {}
    tracker = _Incumbent(state.tours, E, trace)
    lam: float | None = None
    tours, loads = state.tours, state.loads
    while True:
        converged = _descend(tours, loads, state.dem, state.caps, E_aug,
                             cfg.neighborhoods, deadline, tracker)
        if not converged or time.monotonic() > deadline:
            break
        # penalties only reweight existing moves; an empty move set is final
        if next(_iter_moves(tours, E_aug, state.dem, state.caps, loads,
                            cfg.neighborhoods, math.inf), None) is None:
            break
        if lam is None:
            legs = sum(len(t) - 1 for t in tours)
            lam = cfg.gls_alpha * _tour_cost(tours, E) / max(legs, 1)
            if lam <= 0:
                break
        # penalize every edge of maximum utility cost/(1 + penalty)
        edges = _solution_edges(tours)
        best_u = max(E[a][b] / (1 + penalties.get((a, b), 0)) for a, b in edges)
        if best_u <= 0:
            break
        for a, b in edges:
            if E[a][b] / (1 + penalties.get((a, b), 0)) >= best_u - 1e-12:
                p = penalties.get((a, b), 0) + 1
                penalties[(a, b)] = p
                E_aug[a][b] = E_aug[b][a] = E[a][b] + lam * p
    return tracker.best_tours


def _sample_move(rng: random.Random, tours: list[list[int]], dem: list[float],
                 caps: list[float], loads: list[float],
                 neigh: Neighborhoods) -> tuple | None:
    families = [f for f, on in (("t", neigh.two_opt), ("o", neigh.or_opt),
                                ("r", neigh.relocate), ("x", neigh.exchange)) if on]
    if not families:
        return None
    m = len(tours)
    for _ in range(40):
        fam = rng.choice(families)
        if fam == "t":
            r = rng.randrange(m)
            lt = len(tours[r])
            if lt < 4:
                continue
            i, j = sorted(rng.sample(range(1, lt - 1), 2))
            return ("t", r, i, j)
        if fam == "o":
            r = rng.randrange(m)
            lt = len(tours[r])
            if lt < 4:
                continue
            length = rng.randint(1, min(3, lt - 3))
            i = rng.randrange(1, lt - length)
            slots = [*range(0, i - 1), *range(i + length, lt - 1)]
            if not slots:
                continue
            return ("o", r, i, length, rng.choice(slots))
        if fam == "r":
            if m < 2:
                continue
            r = rng.randrange(m)
            if len(tours[r]) < 3:
                continue
            s = rng.randrange(m - 1)
            s += s >= r
            i = rng.randrange(1, len(tours[r]) - 1)
            if loads[s] + dem[tours[r][i]] > caps[s] + _IMPROVE_EPS:
                continue
            return ("r", r, i, s, rng.randrange(len(tours[s]) - 1))
        if m < 2:
            continue
        r = rng.randrange(m)
        s = rng.randrange(m - 1)
        s += s >= r
        if len(tours[r]) < 3 or len(tours[s]) < 3:
            continue
        i = rng.randrange(1, len(tours[r]) - 1)
        j = rng.randrange(1, len(tours[s]) - 1)
        cr, cs = tours[r][i], tours[s][j]
        if (loads[r] - dem[cr] + dem[cs] > caps[r] + _IMPROVE_EPS
                or loads[s] - dem[cs] + dem[cr] > caps[s] + _IMPROVE_EPS):
            continue
        if r > s:
            r, s, i, j = s, r, j, i
        return ("x", r, i, s, j)
    return None


def _run_sa(state: _State, cfg: ImprovementConfig, deadline: float,
            trace: list[float] | None) -> list[list[int]]:
    E = state.E
    tracker = _Incumbent(state.tours, E, trace)
    if tracker.cur <= 0:
        return tracker.best_tours
    rng = random.Random(cfg.seed)
    temp = cfg.sa_initial_temp_fraction * tracker.cur
    tours, loads = state.tours, state.loads
    step = 0
    none_streak = 0
    while time.monotonic() <= deadline:
        move = _sample_move(rng, tours, state.dem, state.caps, loads,
                            cfg.neighborhoods)
        step += 1
        if step % SA_COOLING_INTERVAL == 0:
            temp *= cfg.sa_cooling
        if move is None:
            none_streak += 1
            if none_streak > 200:
                break
            continue
        none_streak = 0
        delta = _delta_of(move, tours, E)
        if delta < 0 or (temp > 1e-12 and rng.random() < math.exp(-delta / temp)):
            _apply(move, tours, loads, state.dem)
            tracker.moved(delta, tours)
    return tracker.best_tours


def _run_tabu(state: _State, cfg: ImprovementConfig, deadline: float,
              trace: list[float] | None) -> list[list[int]]:
    E = state.E
    tracker = _Incumbent(state.tours, E, trace)
    tours, loads = state.tours, state.loads
    tabu: dict[tuple[int, int], int] = {}
    iteration = 0
    stall = 0
    while time.monotonic() <= deadline and stall < cfg.tabu_max_stall:
        iteration += 1
        best_delta, best_move = math.inf, None
        try:
            while best_move is None:
                for delta, move in _iter_moves(tours, E, state.dem, state.caps,
                                               loads, cfg.neighborhoods, deadline):
                    if delta >= best_delta:
                        continue
                    _, added = _edges_of(move, tours)
                    blocked = any(tabu.get(e, 0) >= iteration for e in added)
                    if blocked and tracker.cur + delta >= tracker.best_cost - _IMPROVE_EPS:
                        continue          # tabu and no aspiration
                    best_delta, best_move = delta, move
                if best_move is None:
                    if not tabu:
                        return tracker.best_tours   # no moves at all
                    oldest = min(tabu.items(), key=lambda kv: (kv[1], kv[0]))[0]
                    del tabu[oldest]
        except _OutOfTime:
            break
        removed, _ = _edges_of(best_move, tours)
        _apply(best_move, tours, loads, state.dem)
        prev_best = tracker.best_cost
        tracker.moved(best_delta, tours)
        stall = 0 if tracker.best_cost < prev_best - _IMPROVE_EPS else stall + 1
        if cfg.tabu_tenure > 0:
            for e in removed:
                tabu[e] = iteration + cfg.tabu_tenure
    return tracker.best_tours


def improve_plan(
    problem: ConstructionProblem,
    plan: Plan,
    config: ImprovementConfig,
    trace_out: list[float] | None = None,
) -> Plan:
    """Run the configured improver on a plan within its wall-clock budget."""
    if config.method == "none" or not problem.customers:
        return plan
    state = _State(problem, plan)
    deadline = time.monotonic() + config.time_limit_s
    if config.method == "gls":
        best = _run_gls(state, config, deadline, trace_out)
    elif config.method == "sa":
        best = _run_sa(state, config, deadline, trace_out)
    else:
        best = _run_tabu(state, config, deadline, trace_out)
    return state.to_plan(best)

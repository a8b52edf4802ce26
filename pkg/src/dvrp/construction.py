"""Stage 2: build capacity-feasible routes from scratch.

Three constructors over a common problem shape: parallel savings,
path-cheapest-arc, and global-cheapest-arc. Each vehicle starts from its own
point (the depot at t=0, its current position at a replan) and ends at the
common terminal. Chains that no arc rule ties to a vehicle are matched to
vehicles by a min-cost assignment with free orientation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import (
    Customer,
    DistanceMatrix,
    Infeasible,
    Plan,
    Point,
    Route,
    euclidean_distance,
    make_plan,
)

CONSTRUCTION_METHODS = ("savings", "pca", "gca")

_BIG = 1e15
_EPS = 1e-9


class InfeasibleConstruction(Infeasible):
    """No capacity-feasible route set exists for this constructor."""


@dataclass(frozen=True)
class ConstructionConfig:
    method: str = "savings"           # savings | pca | gca

    def __post_init__(self):
        if self.method not in CONSTRUCTION_METHODS:
            raise ValueError(f"unknown construction method {self.method!r}")


@dataclass(frozen=True)
class ConstructionProblem:
    """Vehicles (start point + residual capacity each), customers, terminal."""

    starts: tuple[Point, ...]
    end: Point
    customers: tuple[Customer, ...]
    capacities: tuple[float, ...]
    matrix: DistanceMatrix            # depot/terminal at index 0

    def __post_init__(self):
        if len(self.starts) != len(self.capacities):
            raise ValueError("one capacity per start required")
        if not self.starts:
            raise ValueError("at least one vehicle required")

    @property
    def m(self) -> int:
        return len(self.starts)


def _demands(problem: ConstructionProblem) -> dict[int, float]:
    return {c.id: c.demand for c in problem.customers}


def _start_leg(problem: ConstructionProblem, v: int, cid: int) -> float:
    return problem.matrix.from_point(problem.starts[v], cid)


def _end_leg(problem: ConstructionProblem, cid: int) -> float:
    return problem.matrix.from_point(problem.end, cid)


def _empty_leg(problem: ConstructionProblem, v: int) -> float:
    return euclidean_distance(problem.starts[v], problem.end)


# ---------------------------------------------------------------------------
# Chain-to-vehicle matching
# ---------------------------------------------------------------------------

def _match_free_chains(
    problem: ConstructionProblem,
    chains: list[list[int]],
    demands: dict[int, float],
    vehicles: list[int],
) -> dict[int, list[int]]:
    """Assign unanchored chains to the given vehicles, choosing orientation.

    Pads with empty chains; an assignment using any infeasible pair means no
    capacity-feasible matching exists.
    """
    if len(chains) > len(vehicles):
        raise InfeasibleConstruction(
            f"{len(chains)} chains for {len(vehicles)} vehicles")
    m = len(vehicles)
    padded: list[list[int] | None] = list(chains) + [None] * (m - len(chains))
    cost = np.zeros((m, m))
    orient = np.zeros((m, m), dtype=bool)    # True: reverse the chain
    for i, chain in enumerate(padded):
        for j, v in enumerate(vehicles):
            if chain is None:
                cost[i, j] = _empty_leg(problem, v)
                continue
            load = sum(demands[c] for c in chain)
            if load > problem.capacities[v] + _EPS:
                cost[i, j] = _BIG
                continue
            fwd = _start_leg(problem, v, chain[0]) + _end_leg(problem, chain[-1])
            rev = _start_leg(problem, v, chain[-1]) + _end_leg(problem, chain[0])
            if rev < fwd - _EPS:
                cost[i, j] = rev
                orient[i, j] = True
            else:
                cost[i, j] = fwd
    rows, cols = linear_sum_assignment(cost)
    out: dict[int, list[int]] = {}
    for i, j in zip(rows, cols):
        if cost[i, j] >= _BIG:
            raise InfeasibleConstruction("no capacity-feasible chain matching")
        chain = padded[i]
        if chain is None:
            out[vehicles[j]] = []
        else:
            out[vehicles[j]] = list(reversed(chain)) if orient[i, j] else list(chain)
    return out


def _finish(problem: ConstructionProblem, visits: dict[int, list[int]]) -> Plan:
    routes = tuple(
        Route(vehicle_id=v, start=problem.starts[v],
              visits=tuple(visits.get(v, [])), end=problem.end)
        for v in range(problem.m)
    )
    return make_plan(routes, problem.matrix)


# ---------------------------------------------------------------------------
# Parallel savings
# ---------------------------------------------------------------------------

def savings_construct(problem: ConstructionProblem) -> Plan:
    """Clarke-Wright parallel savings anchored at the terminal.

    s(i, j) = d(0, i) + d(0, j) - d(i, j), processed in descending order;
    a merge joins two distinct chains at the endpoints i and j when the
    combined demand fits the largest capacity. Passes repeat until no merge
    applies. With several vehicles only positive savings merge; if more
    chains than vehicles remain, merging continues down the list until the
    count fits.
    """
    demands = _demands(problem)
    ids = list(problem.matrix.ids)
    n = len(ids)
    if n == 0:
        return _finish(problem, {})
    cap_bound = max(problem.capacities)
    single = problem.m == 1

    d = problem.matrix.dist
    savings = []
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            s = d[0, a] + d[0, b] - d[a, b]
            savings.append((s, a, b))
    savings.sort(key=lambda t: (-t[0], t[1], t[2]))

    chains: list[list[int] | None] = [[i] for i in range(1, n + 1)]
    chain_of = {i: i - 1 for i in range(1, n + 1)}
    loads = [demands[ids[i - 1]] for i in range(1, n + 1)]

    def endpoints(ci: int) -> tuple[int, int]:
        ch = chains[ci]
        return ch[0], ch[-1]

    def try_merge(a: int, b: int) -> bool:
        ca, cb = chain_of[a], chain_of[b]
        if ca == cb:
            return False
        ha, ta = endpoints(ca)
        hb, tb = endpoints(cb)
        if a not in (ha, ta) or b not in (hb, tb):
            return False
        if loads[ca] + loads[cb] > cap_bound + _EPS:
            return False
        left = chains[ca] if a == ta else list(reversed(chains[ca]))
        right = chains[cb] if b == hb else list(reversed(chains[cb]))
        merged = left + right
        chains[ca] = merged
        chains[cb] = None
        loads[ca] += loads[cb]
        for node in right:
            chain_of[node] = ca
        return True

    def merge_pass(allow_nonpositive: bool) -> bool:
        merged_any = False
        for s, a, b in savings:
            if not allow_nonpositive and s <= 0:
                break
            if try_merge(a, b):
                merged_any = True
        return merged_any

    if single:
        # one connected route is mandatory: keep sweeping, negative savings too
        while merge_pass(allow_nonpositive=True):
            pass
    else:
        merge_pass(allow_nonpositive=False)

    live = [[ids[i - 1] for i in c] for c in chains if c is not None]
    if single and len(live) > 1:
        raise InfeasibleConstruction(
            f"{len(live)} disjoint routes remain under capacity {cap_bound}")
    return _finish(problem, _match_free_chains(problem, live, demands,
                                               list(range(problem.m))))


# ---------------------------------------------------------------------------
# Path cheapest arc
# ---------------------------------------------------------------------------

def path_cheapest_arc_construct(problem: ConstructionProblem) -> Plan:
    """Extend one route at a time by the nearest capacity-feasible customer.

    Vehicles run in index order; a route closes when nothing fits, and
    customers left after the last vehicle make the problem infeasible.
    """
    demands = _demands(problem)
    ids = list(problem.matrix.ids)
    n = len(ids)
    unserved = set(range(1, n + 1))
    d = problem.matrix.dist
    visits: dict[int, list[int]] = {}
    for v in range(problem.m):
        remaining = problem.capacities[v]
        route: list[int] = []
        cur: int | None = None           # matrix index of last visit
        while unserved:
            best: tuple[float, int] | None = None
            for node in unserved:
                if demands[ids[node - 1]] > remaining + _EPS:
                    continue
                dist = (problem.matrix.from_point(problem.starts[v], ids[node - 1])
                        if cur is None else float(d[cur, node]))
                if best is None or (dist, node) < best:
                    best = (dist, node)
            if best is None:
                break
            _, node = best
            unserved.remove(node)
            remaining -= demands[ids[node - 1]]
            route.append(ids[node - 1])
            cur = node
        visits[v] = route
    if unserved:
        raise InfeasibleConstruction(
            f"{len(unserved)} customers fit no remaining vehicle")
    return _finish(problem, visits)


# ---------------------------------------------------------------------------
# Global cheapest arc
# ---------------------------------------------------------------------------

class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        self.parent[rb] = ra
        return ra


def global_cheapest_arc_construct(problem: ConstructionProblem) -> Plan:
    """Accept arcs globally by ascending length.

    An arc joins two chain endpoints when no endpoint exceeds degree two, the
    chains differ (no early cycles), at most one side already carries a
    vehicle anchor, and the merged demand fits. Start-to-customer arcs anchor
    a chain to that vehicle. Leftover chains are matched afterwards.
    """
    demands = _demands(problem)
    ids = list(problem.matrix.ids)
    n = len(ids)
    if n == 0:
        return _finish(problem, {})
    m = problem.m
    d = problem.matrix.dist
    cap_bound = max(problem.capacities)

    arcs: list[tuple[float, int, int]] = []
    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            arcs.append((float(d[a, b]), a, b))
    for v in range(m):
        for b in range(1, n + 1):
            arcs.append((_start_leg(problem, v, ids[b - 1]), n + 1 + v, b))
    arcs.sort(key=lambda t: (t[0], t[1], t[2]))

    uf = _UnionFind(n + 1)
    deg = [0] * (n + 1)                   # includes anchor links
    adj: list[list[int]] = [[] for _ in range(n + 1)]
    load = [0.0] * (n + 1)
    anchor: list[int | None] = [None] * (n + 1)     # per root
    anchored_head: dict[int, int] = {}    # vehicle -> head customer index
    for node in range(1, n + 1):
        load[node] = demands[ids[node - 1]]
    start_used = [False] * m

    for dist, a, b in arcs:
        if a > n:                          # start-to-customer arc
            v = a - n - 1
            if start_used[v] or deg[b] >= 2:
                continue
            rb = uf.find(b)
            if anchor[rb] is not None:
                continue
            if load[rb] > problem.capacities[v] + _EPS:
                continue
            start_used[v] = True
            anchor[rb] = v
            anchored_head[v] = b
            deg[b] += 1
            continue
        if deg[a] >= 2 or deg[b] >= 2:
            continue
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if anchor[ra] is not None and anchor[rb] is not None:
            continue
        v = anchor[ra] if anchor[ra] is not None else anchor[rb]
        bound = problem.capacities[v] if v is not None else cap_bound
        if load[ra] + load[rb] > bound + _EPS:
            continue
        root = uf.union(a, b)
        other = rb if root == ra else ra
        load[root] = load[ra] + load[rb]
        anchor[root] = v
        if root != other:
            anchor[other] = None
        deg[a] += 1
        deg[b] += 1
        adj[a].append(b)
        adj[b].append(a)

    def walk(head: int, banned: int | None = None) -> list[int]:
        path = [head]
        prev, cur = banned, head
        while True:
            nxt = [x for x in adj[cur] if x != prev]
            if not nxt:
                return path
            prev, cur = cur, nxt[0]
            path.append(cur)

    visits: dict[int, list[int]] = {}
    assigned: set[int] = set()
    for v, head in anchored_head.items():
        chain = walk(head)
        visits[v] = [ids[i - 1] for i in chain]
        assigned.update(chain)

    free_chains: list[list[int]] = []
    seen: set[int] = set(assigned)
    for node in range(1, n + 1):
        if node in seen or len(adj[node]) > 1:
            continue
        chain = walk(node)
        seen.update(chain)
        free_chains.append([ids[i - 1] for i in chain])

    free_vehicles = [v for v in range(m) if v not in visits]
    _absorb_excess_chains(problem, visits, free_chains, free_vehicles, demands)
    visits.update(_match_free_chains(problem, free_chains, demands, free_vehicles))
    return _finish(problem, visits)


def _absorb_excess_chains(
    problem: ConstructionProblem,
    visits: dict[int, list[int]],
    free_chains: list[list[int]],
    free_vehicles: list[int],
    demands: dict[int, float],
) -> None:
    """Stitch chains exceeding the free-vehicle count onto anchored routes.

    Repeatedly appends the chain with the cheapest tail junction to a route
    with enough slack; when nothing fits, the chain with the longest internal
    edge splits there and the halves try again.
    """
    route_load = {v: sum(demands[c] for c in chain) for v, chain in visits.items()}
    between = problem.matrix.between
    for _ in range(2 * len(problem.matrix.ids) + 2):
        if len(free_chains) <= len(free_vehicles):
            return
        best = None          # (dist, v, chain_idx, reverse)
        for ci, chain in enumerate(free_chains):
            load = sum(demands[c] for c in chain)
            for v, route in visits.items():
                if not route or route_load[v] + load > problem.capacities[v] + _EPS:
                    continue
                tail = route[-1]
                fwd = (between(tail, chain[0]), v, ci, False)
                rev = (between(tail, chain[-1]), v, ci, True)
                for cand in (fwd, rev):
                    if best is None or cand < best:
                        best = cand
        if best is not None:
            _, v, ci, reverse = best
            chain = free_chains.pop(ci)
            visits[v].extend(reversed(chain) if reverse else chain)
            route_load[v] += sum(demands[c] for c in chain)
            continue
        split = None         # (-edge_len, chain_idx, position)
        for ci, chain in enumerate(free_chains):
            for e in range(len(chain) - 1):
                cand = (-between(chain[e], chain[e + 1]), ci, e)
                if split is None or cand < split:
                    split = cand
        if split is None:
            raise InfeasibleConstruction(
                f"{len(free_chains)} chains cannot be stitched onto "
                f"{len(free_vehicles)} remaining vehicles")
        _, ci, e = split
        chain = free_chains.pop(ci)
        free_chains.insert(ci, chain[: e + 1])
        free_chains.insert(ci + 1, chain[e + 1:])
    raise InfeasibleConstruction("chain stitching failed to settle")


_CONSTRUCTORS = {
    "savings": savings_construct,
    "pca": path_cheapest_arc_construct,
    "gca": global_cheapest_arc_construct,
}


def construct_plan(problem: ConstructionProblem,
                   config: ConstructionConfig | None = None) -> Plan:
    config = config or ConstructionConfig()
    return _CONSTRUCTORS[config.method](problem)

"""Static solves and event-driven replanning.

One pipeline serves both entry points: cluster pending customers (optional),
construct routes per vehicle, improve within the wall-clock budget. The
simulator replays arrival events, interpolates vehicle motion at constant
speed with zero service time, keeps the commitment rule (a customer a vehicle
has already departed toward stays at that vehicle's route head), and falls
back to depot-return reset trips when pending demand exceeds what the fleet
can still carry this trip.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

from .clustering import (
    ClusteringConfig,
    ClusterSet,
    GlobalInfeasible,
    assign_clusters_to_vehicles,
    cluster_customers,
    repair_capacity,
)
from .construction import (
    ConstructionConfig,
    ConstructionProblem,
    construct_plan,
)
from .improvement import ImprovementConfig, Neighborhoods, improve_plan
from .model import (
    Customer,
    Instance,
    Plan,
    Point,
    Route,
    ValidationReport,
    build_distance_matrix,
    euclidean_distance,
    make_plan,
    validate_plan,
)

_TIME_EPS = 1e-12


@dataclass(frozen=True)
class PipelineConfig:
    clustering: ClusteringConfig = ClusteringConfig()
    construction: ConstructionConfig = ConstructionConfig()
    improvement: ImprovementConfig = ImprovementConfig()

    def reseeded(self, seed: int) -> "PipelineConfig":
        return PipelineConfig(
            clustering=dataclasses.replace(self.clustering, seed=seed),
            construction=self.construction,
            improvement=dataclasses.replace(self.improvement, seed=seed),
        )


@dataclass(frozen=True)
class SolveResult:
    plan: Plan
    clusters: ClusterSet | None
    report: ValidationReport


def _plan_pending(
    pending: list[Customer],
    starts: list[Point],
    caps: list[float],
    depot: Point,
    config: PipelineConfig,
) -> tuple[dict[int, list[int]], ClusterSet | None]:
    """Cluster (optional), construct, improve. Returns visit ids per vehicle."""
    m = len(starts)
    if not pending:
        return {v: [] for v in range(m)}, None

    if config.clustering.method == "none":
        matrix = build_distance_matrix(depot, pending)
        problem = ConstructionProblem(
            starts=tuple(starts), end=depot, customers=tuple(pending),
            capacities=tuple(caps), matrix=matrix)
        plan = construct_plan(problem, config.construction)
        plan = improve_plan(problem, plan, config.improvement)
        return {r.vehicle_id: list(r.visits) for r in plan.routes}, None

    demands = {c.id: c.demand for c in pending}
    points = {c.id: c.location for c in pending}
    k_eff = min(m, len(pending))
    clusters = cluster_customers(pending, k_eff, config.clustering)
    if k_eff < m:
        clusters = ClusterSet(
            clusters=clusters.clusters + ((),) * (m - k_eff),
            centroids=clusters.centroids + (depot,) * (m - k_eff),
            method_used=clusters.method_used,
        )
    if len(set(caps)) == 1:
        clusters = repair_capacity(clusters, demands, caps, points)
    clusters = assign_clusters_to_vehicles(clusters, starts, caps, demands, points)

    by_id = {c.id: c for c in pending}
    nonempty = [v for v in range(m) if clusters.clusters[v]]
    sub_budget = config.improvement.time_limit_s / max(len(nonempty), 1)
    improve_cfg = dataclasses.replace(
        config.improvement, time_limit_s=sub_budget,
        neighborhoods=Neighborhoods.intra_only())
    visits: dict[int, list[int]] = {v: [] for v in range(m)}
    for v in nonempty:
        members = tuple(by_id[cid] for cid in clusters.clusters[v])
        sub_matrix = build_distance_matrix(depot, members)
        problem = ConstructionProblem(
            starts=(starts[v],), end=depot, customers=members,
            capacities=(caps[v],), matrix=sub_matrix)
        plan = construct_plan(problem, config.construction)
        plan = improve_plan(problem, plan, improve_cfg)
        visits[v] = list(plan.routes[0].visits)
    return visits, clusters


def solve(instance: Instance, config: PipelineConfig) -> SolveResult:
    """Plan the static customers of an instance from the depot at t=0."""
    customers = list(instance.customers)
    m = instance.fleet.vehicle_count
    depot = instance.depot
    cap = instance.fleet.capacity
    total = sum(c.demand for c in customers)
    if total > cap * m + 1e-9:
        raise GlobalInfeasible(
            f"total demand {total} exceeds fleet capacity {cap * m}")
    visits, clusters = _plan_pending(
        customers, [depot] * m, [cap] * m, depot, config)
    matrix = build_distance_matrix(depot, customers)
    routes = tuple(
        Route(vehicle_id=v, start=depot, visits=tuple(visits.get(v, [])), end=depot)
        for v in range(m))
    plan = make_plan(routes, matrix)
    report = validate_plan(plan, customers, {v: float(cap) for v in range(m)},
                           matrix, depot)
    if not report.passed:
        raise RuntimeError(f"static plan failed validation: {report}")
    return SolveResult(plan=plan, clusters=clusters, report=report)


# ---------------------------------------------------------------------------
# Event-driven simulation
# ---------------------------------------------------------------------------

@dataclass
class _Leg:
    t0: float
    p0: Point
    t1: float
    p1: Point
    serve: int | None = None     # customer served on arrival at p1
    reset: bool = False          # depot arrival restores full capacity


@dataclass
class _VehicleSim:
    vid: int
    position: Point
    residual: float
    legs: list[_Leg] = field(default_factory=list)
    committed: int | None = None
    traveled: float = 0.0


@dataclass(frozen=True)
class SimulationResult:
    plans: tuple[tuple[float, Plan], ...]       # (replan time, plan)
    reports: tuple[ValidationReport, ...]
    served: dict[int, float]                    # customer id -> service time
    realized_distance: float
    completion_time: float
    trace: tuple[dict, ...]                     # one row per replan


def _advance(v: _VehicleSim, t: float, full_cap: float,
             served: dict[int, float], demands: dict[int, float]) -> None:
    """Execute v's legs up to time t; set position/residual/committed."""
    pos = v.position
    committed = None
    for leg in v.legs:
        if leg.t1 <= t + _TIME_EPS:
            v.traveled += euclidean_distance(leg.p0, leg.p1)
            pos = leg.p1
            if leg.serve is not None and leg.serve not in served:
                served[leg.serve] = leg.t1
                v.residual -= demands[leg.serve]
            if leg.reset:
                v.residual = full_cap
        elif leg.t0 < t:
            frac = (t - leg.t0) / (leg.t1 - leg.t0)
            pos = Point(leg.p0.x + frac * (leg.p1.x - leg.p0.x),
                        leg.p0.y + frac * (leg.p1.y - leg.p0.y))
            v.traveled += euclidean_distance(leg.p0, pos)
            committed = leg.serve
            break
        else:
            break
    v.position = pos
    v.committed = committed
    v.legs = []


def _build_legs(v: _VehicleSim, route: Route, t0: float, speed: float,
                points: dict[int, Point], depot: Point,
                reset_prefix: bool) -> None:
    legs: list[_Leg] = []
    t, pos = t0, v.position
    if reset_prefix:
        if v.committed is not None:
            target = points[v.committed]
            dt = euclidean_distance(pos, target) / speed
            legs.append(_Leg(t, pos, t + dt, target, serve=v.committed))
            t, pos = t + dt, target
        if pos != depot:
            dt = euclidean_distance(pos, depot) / speed
            legs.append(_Leg(t, pos, t + dt, depot, reset=True))
            t, pos = t + dt, depot
        elif v.committed is not None:
            legs.append(_Leg(t, pos, t, depot, reset=True))
    for cid in route.visits:
        target = points[cid]
        dt = euclidean_distance(pos, target) / speed
        legs.append(_Leg(t, pos, t + dt, target, serve=cid))
        t, pos = t + dt, target
    if pos != depot or legs:
        dt = euclidean_distance(pos, depot) / speed
        legs.append(_Leg(t, pos, t + dt, depot, reset=True))
    v.legs = legs


def simulate(
    instance: Instance,
    config: PipelineConfig,
) -> SimulationResult:
    """Replay arrival events, replanning at t=0 and at each event time."""
    m = instance.fleet.vehicle_count
    depot = instance.depot
    speed = instance.fleet.speed
    full_cap = float(instance.fleet.capacity)

    batches: list[tuple[float, list[Customer]]] = [(0.0, list(instance.customers))]
    for ev in instance.events:
        if batches[-1][0] == ev.time:
            batches[-1][1].extend(ev.customers)
        else:
            batches.append((ev.time, list(ev.customers)))

    vehicles = [_VehicleSim(vid=v, position=depot, residual=full_cap)
                for v in range(m)]
    served: dict[int, float] = {}
    known: dict[int, Customer] = {}
    demands: dict[int, float] = {}
    plans: list[tuple[float, Plan]] = []
    reports: list[ValidationReport] = []
    trace: list[dict] = []

    for t_now, arrivals in batches:
        for c in arrivals:
            known[c.id] = c
            demands[c.id] = c.demand
        for v in vehicles:
            _advance(v, t_now, full_cap, served, demands)

        pending_all = [c for c in known.values() if c.id not in served]
        committed = {v.vid: v.committed for v in vehicles if v.committed is not None}
        free = [c for c in pending_all if c.id not in committed.values()]
        free_demand = sum(c.demand for c in free)
        if free_demand > full_cap * m + 1e-9:
            raise GlobalInfeasible(
                f"pending demand {free_demand} exceeds one-trip fleet "
                f"capacity {full_cap * m} at t={t_now}")
        effective = [
            v.residual - (demands[v.committed] if v.committed is not None else 0.0)
            for v in vehicles
        ]
        reset = free_demand > sum(effective) + 1e-9

        points = {c.id: c.location for c in pending_all}
        if reset:
            starts = [depot] * m
            caps = [full_cap] * m
        else:
            starts = [points[committed[v.vid]] if v.vid in committed else v.position
                      for v in vehicles]
            caps = effective
        visits, _ = _plan_pending(free, starts, caps, depot, config)

        matrix = build_distance_matrix(depot, pending_all)
        routes = []
        for v in vehicles:
            head = [] if reset or v.committed is None else [v.committed]
            start = depot if reset else v.position
            routes.append(Route(vehicle_id=v.vid, start=start,
                                visits=tuple(head + visits.get(v.vid, [])),
                                end=depot))
        plan = make_plan(tuple(routes), matrix)

        if reset:
            check_pending = free
            check_caps = {v.vid: full_cap for v in vehicles}
        else:
            check_pending = pending_all
            check_caps = {v.vid: v.residual for v in vehicles}
        report = validate_plan(plan, check_pending, check_caps, matrix, depot)
        if not report.passed:
            raise RuntimeError(f"replan at t={t_now} failed validation: {report}")

        for v, route in zip(vehicles, plan.routes):
            _build_legs(v, route, t_now, speed, points, depot,
                        reset_prefix=reset)
        plans.append((t_now, plan))
        reports.append(report)
        trace.append({
            "t": t_now,
            "cost": plan.total_cost,
            "routes": [list(r.visits) for r in plan.routes],
            "positions": [[v.position.x, v.position.y] for v in vehicles],
            "served": len(served),
        })

    completion = max((v.legs[-1].t1 for v in vehicles if v.legs),
                     default=batches[-1][0])
    for v in vehicles:
        _advance(v, math.inf, full_cap, served, demands)

    return SimulationResult(
        plans=tuple(plans),
        reports=tuple(reports),
        served=served,
        realized_distance=sum(v.traveled for v in vehicles),
        completion_time=completion,
        trace=tuple(trace),
    )

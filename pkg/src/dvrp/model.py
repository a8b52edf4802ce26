"""Core domain types for the capacitated routing solver.

Everything downstream (clustering, construction, improvement, simulation)
works in terms of the types defined here: points, customers, fleet
specification, routes, plans, and the shared distance matrix. All types are
immutable value objects; operations are pure functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class InputError(Exception):
    """Bad user-supplied data (files, CLI arguments). CLI exit code 3."""


class Infeasible(Exception):
    """No feasible solution exists for the given state. CLI exit code 2."""


class UnknownCustomerId(KeyError):
    """A route references a customer id absent from the distance matrix."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")


@dataclass(frozen=True)
class Customer:
    """A demand point. arrival_time is 0 for customers known at t=0."""

    id: int
    location: Point
    demand: float
    arrival_time: float = 0.0

    def __post_init__(self):
        if self.demand < 0:
            raise ValueError(f"customer {self.id}: negative demand {self.demand}")


@dataclass(frozen=True)
class FleetSpec:
    """Homogeneous fleet: vehicle_count vehicles of equal capacity and speed."""

    vehicle_count: int
    capacity: float
    speed: float

    def __post_init__(self):
        if self.vehicle_count < 1:
            raise ValueError("vehicle_count must be >= 1")
        if self.capacity <= 0:
            raise ValueError("capacity must be > 0")
        if self.speed <= 0:
            raise ValueError("speed must be > 0")


@dataclass(frozen=True)
class Event:
    """A batch of customers revealed at the same instant."""

    time: float
    customers: tuple[Customer, ...]


@dataclass(frozen=True)
class Instance:
    """A routing problem: depot, fleet, static customers, timed arrivals."""

    name: str
    depot: Point
    fleet: FleetSpec
    customers: tuple[Customer, ...]
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        seen: set[int] = set()
        for c in self.all_customers():
            if c.id in seen:
                raise ValueError(f"duplicate customer id {c.id}")
            seen.add(c.id)
            if c.demand > self.fleet.capacity:
                raise ValueError(
                    f"customer {c.id} demand {c.demand} exceeds vehicle capacity "
                    f"{self.fleet.capacity}"
                )
        prev = 0.0
        for ev in self.events:
            if ev.time <= 0:
                raise ValueError(f"event time {ev.time} must be strictly positive")
            if ev.time < prev:
                raise ValueError("event times must be non-decreasing")
            prev = ev.time

    def all_customers(self) -> Iterable[Customer]:
        yield from self.customers
        for ev in self.events:
            yield from ev.customers


@dataclass(frozen=True)
class Route:
    """One vehicle's itinerary: start point, ordered visits, end point.

    start is the depot at t=0 and the vehicle's current position at replans;
    end is always the depot.
    """

    vehicle_id: int
    start: Point
    visits: tuple[int, ...]
    end: Point


@dataclass(frozen=True)
class Plan:
    """One route per vehicle plus the total travel distance."""

    routes: tuple[Route, ...]
    total_cost: float

    def visited_ids(self) -> list[int]:
        out: list[int] = []
        for r in self.routes:
            out.extend(r.visits)
        return out


def euclidean_distance(p: Point, q: Point) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise Euclidean distances over depot + customers.

    Index 0 is the depot; customer ids map to matrix indices via `index`.
    Kept at full double precision; reports round only for display.
    """

    ids: tuple[int, ...]                 # customer ids, matrix indices 1..n
    points: tuple[Point, ...]            # aligned with matrix indices 0..n
    dist: np.ndarray = field(repr=False)  # (n+1, n+1) symmetric, zero diagonal
    index: Mapping[int, int] = field(repr=False)

    def idx(self, customer_id: int) -> int:
        try:
            return self.index[customer_id]
        except KeyError:
            raise UnknownCustomerId(customer_id) from None

    def point_of(self, customer_id: int) -> Point:
        return self.points[self.idx(customer_id)]

    def between(self, id_a: int, id_b: int) -> float:
        return float(self.dist[self.idx(id_a), self.idx(id_b)])

    def from_depot(self, customer_id: int) -> float:
        return float(self.dist[0, self.idx(customer_id)])

    def from_point(self, p: Point, customer_id: int) -> float:
        return euclidean_distance(p, self.points[self.idx(customer_id)])


def build_distance_matrix(depot: Point, customers: Sequence[Customer]) -> DistanceMatrix:
    """Full pairwise matrix over depot plus the given customers."""
    points = [depot] + [c.location for c in customers]
    coords = np.array([(p.x, p.y) for p in points], dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    ids = tuple(c.id for c in customers)
    index = {cid: i + 1 for i, cid in enumerate(ids)}
    return DistanceMatrix(ids=ids, points=tuple(points), dist=dist, index=index)


def route_cost(route: Route, matrix: DistanceMatrix) -> float:
    """Distance of start -> visits -> end. Empty route with start == end is 0."""
    if not route.visits:
        return euclidean_distance(route.start, route.end)
    total = matrix.from_point(route.start, route.visits[0])
    for a, b in zip(route.visits, route.visits[1:]):
        total += matrix.between(a, b)
    total += matrix.from_point(route.end, route.visits[-1])
    return total


def plan_cost(plan: Plan, matrix: DistanceMatrix) -> float:
    return sum(route_cost(r, matrix) for r in plan.routes)


COST_MISMATCH_REL_TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    kind: str     # MissingCustomer | DuplicateVisit | CapacityExceeded | BadEndpoint | CostMismatch
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __str__(self) -> str:
        if self.passed:
            return "pass"
        return "; ".join(f"{v.kind}({v.detail})" for v in self.violations)


def validate_plan(
    plan: Plan,
    pending: Iterable[Customer],
    residual_capacities: Mapping[int, float],
    matrix: DistanceMatrix,
    depot: Point,
) -> ValidationReport:
    """Check a plan against the customers it must cover and the fleet state.

    Violations are reported, not raised: the returned report lists every
    problem found (missing or duplicated customers, capacity overruns, routes
    not ending at the depot, stored cost drifting from the recomputed one).
    """
    pending = list(pending)
    demand_of = {c.id: c.demand for c in pending}
    violations: list[Violation] = []

    seen: dict[int, int] = {}
    for r in plan.routes:
        for cid in r.visits:
            seen[cid] = seen.get(cid, 0) + 1
    for c in pending:
        if c.id not in seen:
            violations.append(Violation("MissingCustomer", str(c.id)))
    for cid, count in sorted(seen.items()):
        if count > 1:
            violations.append(Violation("DuplicateVisit", f"{cid} x{count}"))

    for r in plan.routes:
        load = sum(demand_of.get(cid, 0.0) for cid in r.visits)
        cap = residual_capacities.get(r.vehicle_id)
        if cap is not None and load > cap + 1e-9:
            violations.append(
                Violation("CapacityExceeded", f"vehicle {r.vehicle_id}: {load} > {cap}")
            )
        if euclidean_distance(r.end, depot) > 1e-9:
            violations.append(
                Violation("BadEndpoint", f"vehicle {r.vehicle_id} ends at "
                                         f"({r.end.x}, {r.end.y})")
            )

    try:
        recomputed = plan_cost(plan, matrix)
    except UnknownCustomerId as exc:
        violations.append(Violation("MissingCustomer", f"unknown id {exc.args[0]}"))
    else:
        scale = max(abs(recomputed), 1.0)
        if abs(recomputed - plan.total_cost) > COST_MISMATCH_REL_TOL * scale:
            violations.append(
                Violation("CostMismatch", f"stored {plan.total_cost} vs {recomputed}")
            )

    return ValidationReport(tuple(violations))


def make_plan(routes: Sequence[Route], matrix: DistanceMatrix) -> Plan:
    """Assemble a Plan with its cost recomputed from the matrix."""
    routes = tuple(routes)
    return Plan(routes=routes, total_cost=sum(route_cost(r, matrix) for r in routes))

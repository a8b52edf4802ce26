"""Stage 1: partition pending customers into vehicle-sized clusters.

Three partitioning methods (k-means, Gaussian mixture, BIRCH) plus the
capacity repair pass and the cluster-to-vehicle matching. The cluster count
always equals the vehicle count; demand enters only through the capacity
check, the features are coordinates alone.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .model import Customer, Infeasible, Point, euclidean_distance

CLUSTER_METHODS = ("none", "kmeans", "gmm", "birch")

GMM_COV_REG = 1e-6
GMM_MIN_WEIGHT = 1e-8
REPAIR_MOVE_FACTOR = 10          # move budget = factor * n customers
BIRCH_MAX_LEAF_ENTRIES_FACTOR = 8  # rebuild with doubled threshold above 8*K entries


class TooFewPoints(Infeasible):
    """Fewer points than requested clusters."""


class DegenerateComponent(Infeasible):
    """A mixture component collapsed twice despite re-seeding."""


class GlobalInfeasible(Infeasible):
    """Total pending demand exceeds total residual capacity."""


class RepairStalled(Infeasible):
    """Capacity repair hit its move budget without reaching feasibility."""


class InfeasibleAssignment(Infeasible):
    """No capacity-feasible cluster-to-vehicle matching exists."""


@dataclass(frozen=True)
class ClusteringConfig:
    method: str = "kmeans"            # none | kmeans | gmm | birch
    max_iterations: int = 100
    convergence_tol: float = 1e-4
    seed: int = 0
    birch_threshold: float = 5.0
    birch_branching: int = 50

    def __post_init__(self):
        if self.method not in CLUSTER_METHODS:
            raise ValueError(f"unknown clustering method {self.method!r}")


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[tuple[int, ...], ...]   # customer ids per cluster
    centroids: tuple[Point, ...]
    method_used: str

    @property
    def k(self) -> int:
        return len(self.clusters)

    def demand_sums(self, demands: Mapping[int, float]) -> list[float]:
        return [sum(demands[c] for c in cl) for cl in self.clusters]


def _coords(customers: Sequence[Customer]) -> np.ndarray:
    return np.array([(c.location.x, c.location.y) for c in customers], dtype=float)


def _kmeanspp_seeds(x: np.ndarray, w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ center indices; falls back to unchosen indices on zero mass."""
    n = len(x)
    chosen = [int(rng.integers(n)) if w is None else
              int(rng.choice(n, p=w / w.sum()))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    weights = np.ones(n) if w is None else w
    while len(chosen) < k:
        probs = d2 * weights
        total = probs.sum()
        if total <= 0:
            pick = next(i for i in range(n) if i not in chosen)
        else:
            pick = int(rng.choice(n, p=probs / total))
        chosen.append(pick)
        d2 = np.minimum(d2, ((x - x[pick]) ** 2).sum(axis=1))
    return x[chosen].copy()


def _fill_empty(assign: np.ndarray, x: np.ndarray, centroids: np.ndarray, k: int) -> bool:
    """Reassign the farthest point into each empty cluster. True if changed."""
    changed = False
    counts = np.bincount(assign, minlength=k)
    for e in range(k):
        if counts[e] > 0:
            continue
        dist = ((x - centroids[e]) ** 2).sum(axis=1)
        order = np.argsort(-dist, kind="stable")
        for cand in order:
            if counts[assign[cand]] >= 2:
                counts[assign[cand]] -= 1
                assign[cand] = e
                counts[e] += 1
                changed = True
                break
    return changed


def _lloyd(
    x: np.ndarray,
    w: np.ndarray | None,
    k: int,
    rng: np.random.Generator,
    max_iterations: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted Lloyd iteration with k-means++ seeding.

    Returns (assignment, centroids). Ties go to the lowest cluster index;
    empty clusters are re-seeded with the point farthest from their stale
    centroid.
    """
    n = len(x)
    if n < k:
        raise TooFewPoints(f"{n} points < {k} clusters")
    weights = np.ones(n) if w is None else np.asarray(w, dtype=float)
    centroids = _kmeanspp_seeds(x, w, k, rng)
    assign = None
    for _ in range(max_iterations):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        refilled = _fill_empty(new_assign, x, centroids, k)
        if assign is not None and not refilled and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        centroids = np.array([
            np.average(x[assign == c], axis=0, weights=weights[assign == c])
            for c in range(k)
        ])
    return assign, centroids


def _cluster_set(
    customers: Sequence[Customer],
    assign: np.ndarray,
    centroids: np.ndarray,
    k: int,
    method: str,
) -> ClusterSet:
    clusters = tuple(
        tuple(customers[i].id for i in range(len(customers)) if assign[i] == c)
        for c in range(k)
    )
    cents = tuple(Point(float(cx), float(cy)) for cx, cy in centroids)
    return ClusterSet(clusters=clusters, centroids=cents, method_used=method)


def kmeans_cluster(
    customers: Sequence[Customer],
    k: int,
    seed: int,
    config: ClusteringConfig | None = None,
) -> ClusterSet:
    """Lloyd's algorithm with k-means++ seeding over customer coordinates."""
    config = config or ClusteringConfig()
    x = _coords(customers)
    rng = np.random.default_rng(seed)
    assign, centroids = _lloyd(x, None, k, rng, config.max_iterations)
    return _cluster_set(customers, assign, centroids, k, "kmeans")


# ---------------------------------------------------------------------------
# Gaussian mixture
# ---------------------------------------------------------------------------

def _log_gauss_2d(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    a, b = cov[0, 0], cov[0, 1]
    c, d = cov[1, 0], cov[1, 1]
    det = a * d - b * c
    diff = x - mean
    # closed-form inverse of the 2x2 covariance
    quad = (d * diff[:, 0] ** 2 - (b + c) * diff[:, 0] * diff[:, 1] + a * diff[:, 1] ** 2) / det
    return -0.5 * (quad + math.log(det) + 2.0 * math.log(2.0 * math.pi))


def gmm_cluster(
    customers: Sequence[Customer],
    k: int,
    seed: int,
    config: ClusteringConfig | None = None,
    loglik_trace: list[float] | None = None,
) -> ClusterSet:
    """EM on a k-component full-covariance 2-D Gaussian mixture.

    Initialized from k-means++ centroids with isotropic covariance; stops on
    relative log-likelihood improvement below convergence_tol. Hard
    assignment takes the argmax responsibility.
    """
    config = config or ClusteringConfig()
    x = _coords(customers)
    n = len(x)
    if n < k:
        raise TooFewPoints(f"{n} points < {k} clusters")
    rng = np.random.default_rng(seed)

    means = _kmeanspp_seeds(x, None, k, rng)
    d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    iso_var = max(float(d2.min(axis=1).mean()) / 2.0, GMM_COV_REG)
    covs = np.array([np.eye(2) * iso_var for _ in range(k)])
    weights = np.full(k, 1.0 / k)
    reseeded = np.zeros(k, dtype=bool)

    prev_ll = -np.inf
    resp = np.full((n, k), 1.0 / k)
    for _ in range(config.max_iterations):
        # E-step
        log_p = np.empty((n, k))
        for c in range(k):
            log_p[:, c] = math.log(weights[c]) + _log_gauss_2d(x, means[c], covs[c])
        log_norm = np.logaddexp.reduce(log_p, axis=1)
        resp = np.exp(log_p - log_norm[:, None])
        ll = float(log_norm.sum())
        if loglik_trace is not None:
            loglik_trace.append(ll)
        if prev_ll > -np.inf and ll - prev_ll < config.convergence_tol * abs(prev_ll):
            break
        prev_ll = ll

        # M-step with diagonal regularization
        mass = resp.sum(axis=0)
        weights = mass / n
        low = np.nonzero(weights < GMM_MIN_WEIGHT)[0]
        if low.size:
            for c in low:
                if reseeded[c]:
                    raise DegenerateComponent(f"component {c} collapsed twice")
                reseeded[c] = True
                far = int(((x[:, None, :] - means[None, :, :]) ** 2)
                          .sum(axis=2).min(axis=1).argmax())
                means[c] = x[far]
                covs[c] = np.eye(2) * iso_var
                weights[c] = 1.0 / k
            weights = weights / weights.sum()
            prev_ll = -np.inf
            continue
        means = (resp.T @ x) / mass[:, None]
        for c in range(k):
            diff = x - means[c]
            covs[c] = (resp[:, c, None] * diff).T @ diff / mass[c]
            covs[c] += np.eye(2) * GMM_COV_REG

    assign = resp.argmax(axis=1)
    # argmax can empty a component; steal its most responsible point back
    counts = np.bincount(assign, minlength=k)
    for e in range(k):
        if counts[e] > 0:
            continue
        order = np.argsort(-resp[:, e], kind="stable")
        for cand in order:
            if counts[assign[cand]] >= 2:
                counts[assign[cand]] -= 1
                assign[cand] = e
                counts[e] += 1
                break
    return _cluster_set(customers, assign, means, k, "gmm")


# ---------------------------------------------------------------------------
# BIRCH
# ---------------------------------------------------------------------------

@dataclass
class _CFEntry:
    n: int
    ls: np.ndarray            # linear sum, shape (2,)
    ss: float                 # squared sum
    child: "_CFNode | None" = None
    point_ids: list[int] = field(default_factory=list)

    @property
    def centroid(self) -> np.ndarray:
        return self.ls / self.n

    def absorb_radius(self, x: np.ndarray) -> float:
        n = self.n + 1
        ls = self.ls + x
        ss = self.ss + float(x @ x)
        return math.sqrt(max(ss / n - float((ls / n) @ (ls / n)), 0.0))

    def add(self, x: np.ndarray, idx: int | None) -> None:
        self.n += 1
        self.ls = self.ls + x
        self.ss += float(x @ x)
        if idx is not None:
            self.point_ids.append(idx)


@dataclass
class _CFNode:
    is_leaf: bool
    entries: list[_CFEntry] = field(default_factory=list)


def _nearest_entry(entries: list[_CFEntry], x: np.ndarray) -> _CFEntry:
    best, best_d = entries[0], float("inf")
    for e in entries:
        d = float(((e.centroid - x) ** 2).sum())
        if d < best_d:
            best, best_d = e, d
    return best


def _split_node(node: _CFNode) -> tuple[_CFEntry, _CFEntry]:
    """Farthest-pair split; returns fresh parent entries for both halves."""
    cents = [e.centroid for e in node.entries]
    m = len(cents)
    si, sj, far = 0, 1, -1.0
    for i in range(m):
        for j in range(i + 1, m):
            d = float(((cents[i] - cents[j]) ** 2).sum())
            if d > far:
                si, sj, far = i, j, d
    left = _CFNode(is_leaf=node.is_leaf)
    right = _CFNode(is_leaf=node.is_leaf)
    for i, e in enumerate(node.entries):
        di = float(((cents[i] - cents[si]) ** 2).sum())
        dj = float(((cents[i] - cents[sj]) ** 2).sum())
        (left if di <= dj else right).entries.append(e)
    return _summary(left), _summary(right)


def _summary(node: _CFNode) -> _CFEntry:
    n = sum(e.n for e in node.entries)
    ls = np.sum([e.ls for e in node.entries], axis=0)
    ss = sum(e.ss for e in node.entries)
    return _CFEntry(n=n, ls=ls, ss=ss, child=node)


def _insert(node: _CFNode, x: np.ndarray, idx: int, threshold: float,
            branching: int) -> _CFEntry | None:
    """Insert a point; returns a sibling summary entry if the node split."""
    if node.is_leaf:
        if node.entries:
            best = _nearest_entry(node.entries, x)
            if best.absorb_radius(x) <= threshold:
                best.add(x, idx)
                return None
        node.entries.append(_CFEntry(n=1, ls=x.copy(), ss=float(x @ x),
                                     point_ids=[idx]))
    else:
        target = _nearest_entry(node.entries, x)
        sibling = _insert(target.child, x, idx, threshold, branching)
        if sibling is None:
            target.add(x, None)
        else:
            # child split: it kept the left half, so refresh its summary
            pos = node.entries.index(target)
            node.entries[pos] = _summary(target.child)
            node.entries.append(sibling)
    if len(node.entries) > branching:
        left, right = _split_node(node)
        node.entries = left.child.entries   # node keeps the left half
        return right
    return None


def _build_cf_tree(x: np.ndarray, threshold: float, branching: int) -> _CFNode:
    root = _CFNode(is_leaf=True)
    for idx, point in enumerate(x):
        sibling = _insert(root, point, idx, threshold, branching)
        if sibling is not None:
            left = _summary(_CFNode(is_leaf=root.is_leaf, entries=root.entries))
            root = _CFNode(is_leaf=False, entries=[left, sibling])
    return root


def _leaf_entries(node: _CFNode) -> list[_CFEntry]:
    if node.is_leaf:
        return list(node.entries)
    out: list[_CFEntry] = []
    for e in node.entries:
        out.extend(_leaf_entries(e.child))
    return out


def birch_cluster(
    customers: Sequence[Customer],
    k: int,
    config: ClusteringConfig | None = None,
) -> ClusterSet:
    """CF-tree condensation followed by weighted k-means on the leaf entries.

    Deterministic for a fixed insertion order: phase 2 seeds its k-means with
    a constant generator, so the output does not depend on config.seed. The
    threshold doubles (tree rebuilt) while the leaf entry count exceeds 8*k,
    and halves while there are fewer entries than clusters.
    """
    config = config or ClusteringConfig()
    x = _coords(customers)
    n = len(x)
    if n < k:
        raise TooFewPoints(f"{n} points < {k} clusters")

    threshold = config.birch_threshold
    for _ in range(64):
        root = _build_cf_tree(x, threshold, config.birch_branching)
        entries = _leaf_entries(root)
        if len(entries) > BIRCH_MAX_LEAF_ENTRIES_FACTOR * k:
            threshold *= 2.0
        elif len(entries) < k:
            threshold /= 2.0
            if threshold < 1e-12:
                raise TooFewPoints(
                    f"only {len(entries)} distinct leaf entries for {k} clusters")
        else:
            break
    else:
        raise TooFewPoints("CF-tree threshold search failed to settle")

    cents = np.array([e.centroid for e in entries])
    weights = np.array([e.n for e in entries], dtype=float)
    entry_assign, centroids = _lloyd(cents, weights, k, np.random.default_rng(0),
                                     config.max_iterations)
    assign = np.empty(n, dtype=int)
    for e, cluster in zip(entries, entry_assign):
        for idx in e.point_ids:
            assign[idx] = cluster
    return _cluster_set(customers, assign, centroids, k, "birch")


# ---------------------------------------------------------------------------
# Capacity repair and vehicle assignment
# ---------------------------------------------------------------------------

def _centroid_of(ids: Sequence[int], points: Mapping[int, Point],
                 fallback: Point) -> Point:
    if not ids:
        return fallback
    xs = [points[i].x for i in ids]
    ys = [points[i].y for i in ids]
    return Point(sum(xs) / len(xs), sum(ys) / len(ys))


def repair_capacity(
    clusters: ClusterSet,
    demands: Mapping[int, float],
    capacities: Sequence[float],
    points: Mapping[int, Point],
) -> ClusterSet:
    """Move customers out of overloaded clusters until all fit their capacity.

    Each step moves one positive-demand customer from the most overloaded
    cluster to the receiving cluster (with enough slack) whose centroid is
    nearest, recomputing centroids after the move. The move budget is
    10 * n customers; hitting it raises RepairStalled.
    """
    k = clusters.k
    if len(capacities) != k:
        raise ValueError("one capacity per cluster required")
    members = [list(c) for c in clusters.clusters]
    loads = [sum(demands[c] for c in m) for m in members]
    total_demand = sum(loads)
    if total_demand > sum(capacities) + 1e-9:
        raise GlobalInfeasible(
            f"total demand {total_demand} exceeds total capacity {sum(capacities)}")

    centroids = list(clusters.centroids)
    n = sum(len(m) for m in members)
    for _ in range(REPAIR_MOVE_FACTOR * max(n, 1)):
        overloads = [loads[i] - capacities[i] for i in range(k)]
        worst = max(range(k), key=lambda i: overloads[i])
        if overloads[worst] <= 1e-9:
            return ClusterSet(
                clusters=tuple(tuple(m) for m in members),
                centroids=tuple(centroids),
                method_used=clusters.method_used,
            )
        best: tuple[float, int, int] | None = None   # (dist, customer, receiver)
        for cust in members[worst]:
            d_c = demands[cust]
            if d_c <= 0:
                continue
            for r in range(k):
                if r == worst or loads[r] + d_c > capacities[r] + 1e-9:
                    continue
                d = euclidean_distance(points[cust], centroids[r])
                if best is None or (d, cust, r) < best:
                    best = (d, cust, r)
        if best is None:
            raise RepairStalled(
                f"cluster {worst} overloaded by {overloads[worst]} with no receiver")
        _, cust, r = best
        members[worst].remove(cust)
        members[r].append(cust)
        loads[worst] -= demands[cust]
        loads[r] += demands[cust]
        centroids[worst] = _centroid_of(members[worst], points, centroids[worst])
        centroids[r] = _centroid_of(members[r], points, centroids[r])
    raise RepairStalled(f"exceeded {REPAIR_MOVE_FACTOR * n} moves")


def _matching(cost: np.ndarray) -> list[int]:
    """Min-cost perfect matching: row i (cluster) -> column (vehicle)."""
    k = cost.shape[0]
    if k <= 6:
        best_perm, best_cost = None, float("inf")
        for perm in itertools.permutations(range(k)):
            c = sum(cost[i, perm[i]] for i in range(k))
            if c < best_cost - 1e-12:
                best_perm, best_cost = perm, c
        return list(best_perm)
    from scipy.optimize import linear_sum_assignment

    rows, cols = linear_sum_assignment(cost)
    out = [0] * k
    for r, c in zip(rows, cols):
        out[r] = int(c)
    return out


def assign_clusters_to_vehicles(
    clusters: ClusterSet,
    vehicle_positions: Sequence[Point],
    residual_capacities: Sequence[float],
    demands: Mapping[int, float],
    points: Mapping[int, Point],
) -> ClusterSet:
    """Match clusters to vehicles by minimum total centroid-to-vehicle distance.

    Returns the clusters reordered so cluster i is served by vehicle i. If a
    matched cluster exceeds its vehicle's residual capacity, one repair pass
    runs with the matched capacities; failure raises InfeasibleAssignment.
    """
    k = clusters.k
    if k != len(vehicle_positions):
        raise ValueError("cluster count must equal vehicle count")
    cost = np.array([
        [euclidean_distance(cen, pos) for pos in vehicle_positions]
        for cen in clusters.centroids
    ])
    vehicle_of = _matching(cost)
    order = [0] * k                      # cluster index serving vehicle v
    for ci, v in enumerate(vehicle_of):
        order[v] = ci
    matched = ClusterSet(
        clusters=tuple(clusters.clusters[ci] for ci in order),
        centroids=tuple(clusters.centroids[ci] for ci in order),
        method_used=clusters.method_used,
    )
    loads = matched.demand_sums(demands)
    if all(load <= cap + 1e-9 for load, cap in zip(loads, residual_capacities)):
        return matched
    try:
        return repair_capacity(matched, demands, list(residual_capacities), points)
    except (GlobalInfeasible, RepairStalled) as exc:
        raise InfeasibleAssignment(str(exc)) from exc


def cluster_customers(
    customers: Sequence[Customer],
    k: int,
    config: ClusteringConfig,
) -> ClusterSet:
    """Dispatch on config.method. 'none' is handled by the pipeline, not here."""
    if config.method == "kmeans":
        return kmeans_cluster(customers, k, config.seed, config)
    if config.method == "gmm":
        return gmm_cluster(customers, k, config.seed, config)
    if config.method == "birch":
        return birch_cluster(customers, k, config)
    raise ValueError(f"no clustering dispatch for method {config.method!r}")

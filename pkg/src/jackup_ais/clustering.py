"""K-means over raw (lat, lon) degree pairs, and rejection of path clusters.

Points are (n, 2) arrays in (lat, lon) order.  The metric is plain squared
Euclidean distance in degrees; metric distances (meters) only enter when
deciding which records dwell near a center.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ConfigurationError, InfeasibleError
from .geo import GeoPoint, haversine_np
from .ingest import US, Trajectory
from .segmentation import in_radius_mask, runs

log = logging.getLogger(__name__)


def select_k(n_turbines: int, extra: int = 5) -> int:
    """Turbine count plus a few spare clusters to soak up transit points."""
    if n_turbines < 1:
        raise ConfigurationError(f"n_turbines must be >= 1, got {n_turbines}")
    if extra < 0:
        raise ConfigurationError(f"extra clusters must be >= 0, got {extra}")
    return n_turbines + extra


@dataclass
class ClusterModel:
    k: int
    centers: np.ndarray  # (k, 2) lat, lon
    assignments: np.ndarray  # (n,) cluster index per input point, input order
    inertia: float
    iterations_run: int
    seed: int
    converged: bool = False
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def center(self, j: int) -> GeoPoint:
        return GeoPoint(float(self.centers[j, 0]), float(self.centers[j, 1]))


def objective(points: np.ndarray, centers: np.ndarray, assignments: np.ndarray) -> float:
    """Sum of squared distances of each point to its assigned center."""
    diff = np.asarray(points, dtype=np.float64) - centers[assignments]
    return float(np.einsum("ij,ij->", diff, diff))


def _as_points(points) -> np.ndarray:
    if len(points) and isinstance(points[0], GeoPoint):
        points = [(p.lat, p.lon) for p in points]
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {arr.shape}")
    return arr


def _assign(X: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center per point (lowest index on ties) and the squared distance to it."""
    return _kernels.assign(np.ascontiguousarray(X), np.ascontiguousarray(C))


def _update(X: np.ndarray, labels: np.ndarray, d2: np.ndarray, C: np.ndarray) -> np.ndarray:
    k = len(C)
    counts = np.bincount(labels, minlength=k)
    new = np.empty_like(C)
    for dim in range(X.shape[1]):
        sums = np.bincount(labels, weights=X[:, dim], minlength=k)
        with np.errstate(invalid="ignore", divide="ignore"):
            new[:, dim] = sums / counts
    empty = np.flatnonzero(counts == 0)
    if len(empty):
        # re-seed each empty cluster on the point currently worst served
        d2 = d2.copy()
        for j in empty:
            i = int(np.argmax(d2))
            new[j] = X[i]
            d2[i] = 0.0
    return new


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator, n_local_trials: int | None = None) -> np.ndarray:
    """Greedy k-means++ seeding: each step keeps the best of several D^2-sampled candidates."""
    n = len(X)
    if n_local_trials is None:
        n_local_trials = 2 + int(math.log(k))
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = np.full(n, np.inf)
    _kernels.update_closest(X, closest, first)
    for c in range(1, k):
        cum = np.cumsum(closest)
        draws = rng.random(n_local_trials) * cum[-1]
        cand = np.minimum(np.searchsorted(cum, draws), n - 1)
        pots = _kernels.candidate_potentials(X, closest, cand)
        best = int(cand[int(np.argmin(pots))])
        centers[c] = X[best]
        _kernels.update_closest(X, closest, best)
    return centers


def kmeans_fit(
    points,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 0.0,
    timestamps=None,
    check_monotone: bool = True,
) -> ClusterModel:
    """Lloyd's algorithm from a seeded k-means++ start.

    Points are canonically sorted by (lat, lon, timestamp) before seeding so
    the result does not depend on input order beyond label numbering.
    Iteration stops when no assignment changes, when no center moves more
    than ``tol`` degrees, or after ``max_iter`` rounds.
    """
    P = _as_points(points)
    n = len(P)
    if k < 1:
        raise InfeasibleError(f"k must be >= 1, got {k}")
    if n == 0 or n < k:
        raise InfeasibleError(f"cannot form {k} clusters from {n} points")

    keys = [P[:, 1], P[:, 0]]
    if timestamps is not None:
        keys.insert(0, np.asarray(timestamps))
    order = np.lexsort(keys)
    shift = P[order].mean(axis=0)
    X = P[order] - shift

    rng = np.random.default_rng(seed)
    C = kmeans_plusplus(X, k, rng)
    history: list[float] = []
    prev = None
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        labels, d2 = _assign(X, C)
        history.append(float(d2.sum()))
        if check_monotone and len(history) > 1 and history[-1] > history[-2] * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"k-means objective increased: {history[-2]!r} -> {history[-1]!r}")
        if prev is not None and np.array_equal(labels, prev):
            converged = True
            break
        new = _update(X, labels, d2, C)
        moved = float(np.max(np.abs(new - C)))
        C, prev = new, labels
        if moved <= tol:
            labels, d2 = _assign(X, C)
            C = _update(X, labels, d2, C)
            converged = True
            break
    else:
        labels = prev

    counts = np.bincount(labels, minlength=k)
    centers = C + shift
    # empty clusters keep their re-seeded position; occupied ones are member means,
    # taken relative to each cluster's first member to keep the sum small
    Ps = P[order]
    occupied = counts > 0
    first = np.full(k, -1)
    first[labels[::-1]] = np.arange(n)[::-1]
    ref = Ps[np.maximum(first, 0)]
    for dim in range(2):
        sums = np.bincount(labels, weights=Ps[:, dim] - ref[labels, dim], minlength=k)
        centers[occupied, dim] = ref[occupied, dim] + sums[occupied] / counts[occupied]

    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = labels
    return ClusterModel(
        k=k,
        centers=centers,
        assignments=assignments,
        inertia=objective(P, centers, assignments),
        iterations_run=it,
        seed=seed,
        converged=converged,
        history=history,
    )


def restarts(points, k: int, seeds: Sequence[int], **kwargs) -> ClusterModel:
    """Best of several seeded fits by inertia; ties go to the lowest seed."""
    if not seeds:
        raise ConfigurationError("restarts needs at least one seed")
    P = _as_points(points)
    best: ClusterModel | None = None
    for seed in sorted(seeds):
        model = kmeans_fit(P, k, seed=seed, **kwargs)
        log.debug("seed %d: inertia %.6g after %d iterations", seed, model.inertia, model.iterations_run)
        if best is None or model.inertia < best.inertia:
            best = model
    return best


@dataclass(frozen=True)
class ClusterVerdict:
    cluster: int
    point_count: int
    dwell_seconds: float
    kept: bool
    reason: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def default_min_points(n_points: int, fraction: float = 0.01) -> int:
    return max(1, math.ceil(fraction * n_points))


def dwell_seconds(traj: Trajectory, member: np.ndarray, center: GeoPoint, radius_m: float) -> float:
    """Total time spent by consecutive member records within radius_m of center."""
    mask = member & in_radius_mask(traj, center, radius_m)
    starts, ends = runs(mask)
    return float((traj.t_us[ends] - traj.t_us[starts]).sum() / US)


def discard_path_clusters(
    model: ClusterModel, traj: Trajectory, min_points: int, radius_m: float = 100.0
) -> list[ClusterVerdict]:
    """Keep clusters holding at least ``min_points`` records; the rest are transit paths.

    ``traj`` must be the trajectory whose records were clustered, in the same order.
    """
    if len(model.assignments) != len(traj):
        raise ValueError("model assignments do not cover the trajectory")
    counts = model.counts
    verdicts = []
    for j in range(model.k):
        member = model.assignments == j
        dwell = dwell_seconds(traj, member, model.center(j), radius_m) if counts[j] else 0.0
        kept = bool(counts[j] >= min_points)
        verdicts.append(
            ClusterVerdict(j, int(counts[j]), dwell, kept, "point threshold met" if kept else "below point threshold")
        )
    return verdicts


def suppress_overlapping(model: ClusterModel, verdicts: list[ClusterVerdict], min_separation_m: float) -> list[ClusterVerdict]:
    """Discard kept clusters whose center lies within ``min_separation_m`` of a larger kept one.

    Two kept centers that close would count the same dwell twice.
    """
    kept = sorted((v for v in verdicts if v.kept), key=lambda v: (-v.point_count, v.cluster))
    survivors: list[int] = []
    out = {v.cluster: v for v in verdicts}
    for v in kept:
        c = model.centers[v.cluster]
        clash = [
            s for s in survivors
            if haversine_np(c[0], c[1], model.centers[s, 0], model.centers[s, 1]) < min_separation_m
        ]
        if clash:
            out[v.cluster] = ClusterVerdict(v.cluster, v.point_count, v.dwell_seconds, False, f"overlaps cluster {clash[0]}")
        else:
            survivors.append(v.cluster)
    return [out[j] for j in range(len(verdicts))]


def model_json(model: ClusterModel, verdicts: list[ClusterVerdict] | None = None) -> dict:
    doc = {
        "k": model.k,
        "seed": model.seed,
        "inertia": model.inertia,
        "iterations_run": model.iterations_run,
        "converged": model.converged,
        "centers": [{"cluster": j, "lat": float(c[0]), "lon": float(c[1])} for j, c in enumerate(model.centers)],
        "counts": model.counts.tolist(),
    }
    if verdicts is not None:
        doc["verdicts"] = [v.as_dict() for v in verdicts]
    return doc

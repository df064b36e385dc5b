"""Dwell segments around cluster centers and the installation/harbor/transit split."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import InconsistencyError
from .geo import GeoPoint, degree_box, haversine_np
from .ingest import US, AnalysisWindow, BBox, Trajectory

log = logging.getLogger(__name__)

Kind = Literal["installation", "harbor"]
HOUR_US = 3600 * US


def in_radius_mask(traj: Trajectory, center: GeoPoint, radius_m: float) -> np.ndarray:
    """Boolean mask of records within radius_m (haversine) of center."""
    if radius_m <= 0:
        raise ValueError(f"radius must be positive, got {radius_m}")
    lat, lon = traj.lat, traj.lon
    dlat, dlon = degree_box(center, radius_m)
    cand = np.flatnonzero((np.abs(lat - center.lat) <= dlat) & (np.abs(lon - center.lon) <= dlon))
    mask = np.zeros(len(traj), dtype=bool)
    if len(cand):
        mask[cand] = haversine_np(center.lat, center.lon, lat[cand], lon[cand]) <= radius_m
    return mask


def runs(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start and end (inclusive) indices of maximal runs of True."""
    m = np.concatenate(([False], np.asarray(mask, dtype=bool), [False]))
    edges = np.flatnonzero(m[1:] != m[:-1])
    return edges[0::2], edges[1::2] - 1


@dataclass(frozen=True)
class DwellSegment:
    cluster_id: int
    center: GeoPoint
    enter_us: int
    exit_us: int
    bracket_lo_us: int
    bracket_hi_us: int
    kind: Kind
    n_points: int = 0

    def __post_init__(self) -> None:
        if not self.bracket_lo_us <= self.enter_us <= self.exit_us <= self.bracket_hi_us:
            raise ValueError(f"segment bounds out of order: {self}")

    @property
    def duration_us(self) -> int:
        return self.exit_us - self.enter_us

    @property
    def bracket_us(self) -> int:
        return self.bracket_hi_us - self.bracket_lo_us

    @property
    def duration_s(self) -> float:
        return self.duration_us / US

    @property
    def duration_h(self) -> float:
        return self.duration_us / HOUR_US

    @property
    def bracket_h(self) -> float:
        return self.bracket_us / HOUR_US


def segments_from_mask(
    traj: Trajectory, mask: np.ndarray, center: GeoPoint, kind: Kind, cluster_id: int
) -> list[DwellSegment]:
    t = traj.t_us
    starts, ends = runs(mask)
    out = []
    for s, e in zip(starts.tolist(), ends.tolist()):
        lo = t[s - 1] if s > 0 else t[s]
        hi = t[e + 1] if e + 1 < len(t) else t[e]
        out.append(DwellSegment(cluster_id, center, int(t[s]), int(t[e]), int(lo), int(hi), kind, e - s + 1))
    return out


def extract_dwell_segments(
    traj: Trajectory,
    center: GeoPoint,
    radius_m: float = 100.0,
    kind: Kind = "installation",
    cluster_id: int = -1,
) -> list[DwellSegment]:
    """Maximal runs of consecutive in-radius records.

    A run only ends at an out-of-radius record; time gaps inside the radius
    do not split it.  The bracket extends to the neighbouring out-of-radius
    records, or to the run's own ends at the edges of the trajectory.
    """
    if len(traj) == 0:
        return []
    return segments_from_mask(traj, in_radius_mask(traj, center, radius_m), center, kind, cluster_id)


def split_by_duration(segments: Sequence[DwellSegment], min_duration_h: float) -> tuple[list[DwellSegment], list[DwellSegment]]:
    """(segments lasting at least min_duration_h, the rest)."""
    limit = min_duration_h * HOUR_US
    keep = [s for s in segments if s.duration_us >= limit]
    drop = [s for s in segments if s.duration_us < limit]
    return keep, drop


@dataclass(frozen=True)
class InstallationRecord:
    cluster_id: int
    center: GeoPoint
    segments: tuple[DwellSegment, ...]

    def __post_init__(self) -> None:
        if self.total_us > self.uncertainty_hi_us:
            raise AssertionError("installation total exceeds its bracket sum")

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def total_us(self) -> int:
        return sum(s.duration_us for s in self.segments)

    @property
    def uncertainty_hi_us(self) -> int:
        return sum(s.bracket_us for s in self.segments)

    @property
    def total_duration_s(self) -> float:
        return self.total_us / US

    @property
    def uncertainty_hi_s(self) -> float:
        return self.uncertainty_hi_us / US

    @property
    def total_h(self) -> float:
        return self.total_us / HOUR_US

    @property
    def uncertainty_hi_h(self) -> float:
        return self.uncertainty_hi_us / HOUR_US


def aggregate_installation(cluster_id: int, center: GeoPoint, segments: Sequence[DwellSegment]) -> InstallationRecord | None:
    """Sum one turbine location's dwell segments. No segments, no record."""
    if not segments:
        return None
    if any(s.cluster_id != cluster_id for s in segments):
        raise ValueError(f"segments from several clusters passed for cluster {cluster_id}")
    return InstallationRecord(cluster_id, center, tuple(segments))


@dataclass(frozen=True)
class HarborHint:
    """Region known to contain the loading harbor: a box, or a disc around a point."""

    bbox: BBox | None = None
    center: GeoPoint | None = None
    radius_m: float | None = None

    def __post_init__(self) -> None:
        if (self.bbox is None) == (self.center is None):
            raise ValueError("harbor hint needs exactly one of bbox or center+radius_m")
        if self.center is not None and not (self.radius_m and self.radius_m > 0):
            raise ValueError("harbor hint center requires a positive radius_m")

    def contains(self, lat, lon) -> np.ndarray:
        if self.bbox is not None:
            return self.bbox.contains(lat, lon)
        return haversine_np(self.center.lat, self.center.lon, lat, lon) <= self.radius_m

    @classmethod
    def from_dict(cls, d: dict) -> HarborHint:
        if "bbox" in d:
            b = d["bbox"]
            if isinstance(b, dict):
                return cls(bbox=BBox(b["lat_min"], b["lat_max"], b["lon_min"], b["lon_max"]))
            return cls(bbox=BBox(*b))
        return cls(center=GeoPoint(d["center"][0], d["center"][1]), radius_m=float(d["radius_m"]))

    def as_dict(self) -> dict:
        if self.bbox is not None:
            return {"bbox": dict(self.bbox.__dict__)}
        return {"center": [self.center.lat, self.center.lon], "radius_m": self.radius_m}


@dataclass
class HarborResult:
    segments: list[DwellSegment]
    model: object | None = None
    verdicts: list | None = None
    n_hint_points: int = 0

    @property
    def centers(self) -> list[GeoPoint]:
        if self.model is None:
            return []
        return [self.model.center(v.cluster) for v in self.verdicts if v.kept]


def detect_harbor(
    traj: Trajectory,
    hint: HarborHint,
    k_harbor: int = 4,
    min_points: int | None = None,
    radius_m: float = 100.0,
    seeds: Sequence[int] = (0,),
) -> HarborResult:
    """Locate berths inside the hint region and extract harbor dwell segments.

    Same recipe as for turbines: cluster the records inside the hint, keep
    well-populated clusters, then apply the radius rule against each kept
    center over the whole trajectory.
    """
    from .clustering import default_min_points, discard_path_clusters, restarts, suppress_overlapping

    inside = np.flatnonzero(hint.contains(traj.lat, traj.lon))
    if len(inside) == 0:
        log.warning("no records inside the harbor hint region")
        return HarborResult([])
    sub = traj.take(inside)
    k = min(k_harbor, len(sub))
    points = np.column_stack([sub.lat, sub.lon])
    model = restarts(points, k, list(seeds), timestamps=sub.t_us)
    if min_points is None:
        min_points = default_min_points(len(sub))
    verdicts = discard_path_clusters(model, sub, min_points, radius_m)
    verdicts = suppress_overlapping(model, verdicts, 2 * radius_m)
    segments: list[DwellSegment] = []
    for v in verdicts:
        if v.kept:
            segments += extract_dwell_segments(traj, model.center(v.cluster), radius_m, "harbor", v.cluster)
    segments.sort(key=lambda s: (s.enter_us, s.cluster_id))
    return HarborResult(segments, model, verdicts, len(sub))


def compute_transit(window: AnalysisWindow, installation_total_us: int, harbor_total_us: int) -> int:
    """Window length minus installation and harbor time (all in microseconds)."""
    transit = window.length_us - installation_total_us - harbor_total_us
    if transit < 0:
        raise InconsistencyError(
            f"installation ({installation_total_us / HOUR_US:.3f} h) + harbor ({harbor_total_us / HOUR_US:.3f} h) "
            f"exceed the window ({window.length_us / HOUR_US:.3f} h); installation and harbor regions overlap?"
        )
    return transit


LABELS = ("transit", "installation", "harbor")


@dataclass
class PointLabels:
    """Per-record label codes aligned with the trajectory: 0 transit, 1 installation, 2 harbor."""

    codes: np.ndarray

    def __len__(self) -> int:
        return len(self.codes)

    def names(self) -> np.ndarray:
        return np.asarray(LABELS)[self.codes]

    def counts(self) -> dict[str, int]:
        c = Counter(self.codes.tolist())
        return {name: c.get(i, 0) for i, name in enumerate(LABELS)}


def label_points(
    traj: Trajectory,
    installation_centers: Sequence[GeoPoint],
    harbor_centers: Sequence[GeoPoint],
    radius_m: float = 100.0,
) -> PointLabels:
    """Label every record by radius membership; installation wins over harbor."""
    codes = np.zeros(len(traj), dtype=np.int8)
    harbor = np.zeros(len(traj), dtype=bool)
    for c in harbor_centers:
        harbor |= in_radius_mask(traj, c, radius_m)
    inst = np.zeros(len(traj), dtype=bool)
    for c in installation_centers:
        inst |= in_radius_mask(traj, c, radius_m)
    codes[harbor] = 2
    codes[inst] = 1
    return PointLabels(codes)


def hours(us: int) -> float:
    return us / HOUR_US


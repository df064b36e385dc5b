"""Campaign statistics: per-farm duration summary, time shares, histogram and wind join."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import pandas as pd

from .errors import InputError, InsufficientDataError, SchemaError
from .ingest import AnalysisWindow
from .segmentation import HOUR_US, InstallationRecord, compute_transit

log = logging.getLogger(__name__)


def round_half_up(x: float, ndigits: int = 0) -> float:
    q = 10.0**ndigits
    return math.floor(x * q + 0.5) / q


@dataclass(frozen=True)
class FarmStats:
    n_identified: int
    avg_h: float
    sd_h: float
    min_h: float
    median_h: float
    max_h: float
    n_actual: int | None
    coverage_pct: int | None

    def as_dict(self) -> dict:
        return asdict(self)


def farm_stats(durations_h: Sequence[float], n_actual: int | None = None) -> FarmStats:
    """Mean, sample sd, min, median, max and coverage of per-turbine durations."""
    d = np.asarray(durations_h, dtype=np.float64)
    if d.size == 0:
        raise InsufficientDataError("farm statistics need at least one duration")
    sd = float(d.std(ddof=1)) if d.size > 1 else 0.0
    coverage = None
    if n_actual is not None:
        if n_actual < 1:
            raise ValueError("n_actual must be >= 1")
        coverage = int(round_half_up(100.0 * d.size / n_actual))
        if d.size > n_actual:
            log.warning("identified %d installations but the farm has only %d turbines", d.size, n_actual)
    return FarmStats(
        n_identified=int(d.size),
        avg_h=float(d.mean()),
        sd_h=sd,
        min_h=float(d.min()),
        median_h=float(np.median(d)),
        max_h=float(d.max()),
        n_actual=n_actual,
        coverage_pct=coverage,
    )


def cumulative_histogram(durations_h: Sequence[float]) -> list[tuple[float, float]]:
    """Support points (d_(i), i/n) of the empirical distribution function."""
    d = np.sort(np.asarray(durations_h, dtype=np.float64))
    n = d.size
    if n == 0:
        raise InsufficientDataError("cumulative histogram needs at least one duration")
    return [(float(x), (i + 1) / n) for i, x in enumerate(d)]


def naive_average(window: AnalysisWindow, n_turbines: int) -> float:
    """Whole-campaign hours per turbine, the figure usually quoted without AIS analysis."""
    if n_turbines < 1:
        raise ValueError("n_turbines must be >= 1")
    return window.hours / n_turbines


@dataclass(frozen=True)
class TimeShare:
    transit_h: float
    installation_h: float
    harbor_h: float
    total_h: float
    transit_pct: float
    installation_pct: float
    harbor_pct: float

    def as_dict(self) -> dict:
        return asdict(self)


def time_share(window: AnalysisWindow, installation_total_h: float, harbor_total_h: float) -> TimeShare:
    """Split the window into transit, installation and harbor hours with percentages (0.1 % resolution)."""
    inst_us = round(installation_total_h * HOUR_US)
    harbor_us = round(harbor_total_h * HOUR_US)
    return time_share_us(window, inst_us, harbor_us)


def time_share_us(window: AnalysisWindow, installation_us: int, harbor_us: int) -> TimeShare:
    transit_us = compute_transit(window, installation_us, harbor_us)
    total = window.length_us

    def pct(part: int) -> float:
        return round_half_up(100.0 * part / total, 1)

    return TimeShare(
        transit_h=transit_us / HOUR_US,
        installation_h=installation_us / HOUR_US,
        harbor_h=harbor_us / HOUR_US,
        total_h=total / HOUR_US,
        transit_pct=pct(transit_us),
        installation_pct=pct(installation_us),
        harbor_pct=pct(harbor_us),
    )


@dataclass(frozen=True)
class WindJoinRow:
    cluster_id: int
    avg_wind_mps: float | None
    duration_h: float
    n_samples: int
    flagged: bool

    def as_dict(self) -> dict:
        return asdict(self)


def read_wind_csv(path: str | Path | TextIO) -> tuple[np.ndarray, np.ndarray]:
    """Read ``timestamp_utc,wind_speed_mps``; returns (t_us, speed) arrays."""
    try:
        df = pd.read_csv(path, dtype={"timestamp_utc": str})
    except pd.errors.EmptyDataError:
        return np.empty(0, dtype=np.int64), np.empty(0)
    missing = {"timestamp_utc", "wind_speed_mps"} - set(df.columns)
    if missing:
        raise SchemaError(f"wind CSV lacks column(s) {sorted(missing)}")
    ts = pd.to_datetime(df["timestamp_utc"], utc=True, format="ISO8601", errors="coerce")
    if ts.isna().any():
        raise InputError("wind CSV has unparseable timestamps")
    return ts.to_numpy(dtype="datetime64[us]").astype(np.int64), df["wind_speed_mps"].to_numpy(dtype=np.float64)


def wind_join(installations: Sequence[InstallationRecord], wind_t_us, wind_mps) -> list[WindJoinRow]:
    """Mean wind speed over each installation's dwell segments (inclusive endpoints).

    Rows with no wind sample inside any segment are returned with ``flagged``
    set and no average; callers drop them from the joined table.
    """
    t = np.asarray(wind_t_us, dtype=np.int64)
    v = np.asarray(wind_mps, dtype=np.float64)
    if len(t) != len(v):
        raise InputError("wind timestamps and speeds differ in length")
    if np.any(np.diff(t) < 0):
        raise InputError("wind series is not sorted by timestamp")
    rows = []
    for rec in installations:
        total = 0.0
        n = 0
        for seg in rec.segments:
            lo = np.searchsorted(t, seg.enter_us, side="left")
            hi = np.searchsorted(t, seg.exit_us, side="right")
            total += float(v[lo:hi].sum())
            n += int(hi - lo)
        avg = total / n if n else None
        rows.append(WindJoinRow(rec.cluster_id, avg, rec.total_h, n, n == 0))
    return rows


def naive_vs_measured(naive_h: float, avg_h: float) -> float:
    """Relative excess of the naive per-turbine figure over the measured mean, in percent."""
    return 100.0 * (naive_h / avg_h - 1.0)

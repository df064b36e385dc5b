"""Broker CSV ingestion, filtering and trajectory construction.

Records are held column-wise (:class:`PositionTable`) because a single
campaign easily runs to millions of fixes; :class:`PositionRecord` is the
row view used at API edges.  Timestamps are int64 microseconds since the
Unix epoch, UTC, so duration arithmetic downstream is exact.
"""

from __future__ import annotations

import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np
import pandas as pd

from .errors import InputError, InsufficientDataError, SchemaError
from .geo import haversine_np

log = logging.getLogger(__name__)

US = 1_000_000
# anything earlier is a placeholder, not a real fix (AIS postdates it)
EARLIEST_VALID = datetime(1990, 1, 1, tzinfo=timezone.utc)

DMA_COLUMNS = {
    "timestamp": "# Timestamp",
    "mmsi": "MMSI",
    "lat": "Latitude",
    "lon": "Longitude",
    "nav_status": "Navigational status",
    "sog": "SOG",
    "cog": "COG",
}
DMA_TIMESTAMP_FORMAT = "%d/%m/%Y %H:%M:%S"

INTERCHANGE_HEADER = ["timestamp_utc", "mmsi", "lat", "lon", "sog", "cog", "nav_status"]

NAV_STATUS_NAMES = {
    "under way using engine": 0,
    "at anchor": 1,
    "not under command": 2,
    "restricted maneuverability": 3,
    "restricted manoeuverability": 3,
    "constrained by her draught": 4,
    "moored": 5,
    "aground": 6,
    "engaged in fishing": 7,
    "under way sailing": 8,
    "reserved for future amendment [hsc]": 9,
    "reserved for future amendment [wig]": 10,
    "power-driven vessel towing astern": 11,
    "power-driven vessel pushing ahead or towing alongside": 12,
    "reserved for future use": 13,
    "ais-sart": 14,
    "unknown value": 15,
    "unknown": 15,
}


def to_us(ts: datetime) -> int:
    if ts.tzinfo is None:
        raise ValueError(f"naive datetime {ts!r}; timestamps must carry a UTC offset")
    delta = ts - datetime(1970, 1, 1, tzinfo=timezone.utc)
    return (delta.days * 86_400 + delta.seconds) * US + delta.microseconds


def from_us(t_us: int) -> datetime:
    return datetime(1970, 1, 1, tzinfo=timezone.utc) + timedelta(microseconds=int(t_us))


def parse_utc(text: str) -> datetime:
    """ISO-8601 instant; a missing offset is taken as UTC."""
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_utc(t_us) -> np.ndarray:
    """ISO-8601 strings with a trailing Z; second resolution unless sub-second parts exist."""
    t_us = np.asarray(t_us, dtype=np.int64)
    unit = "s" if np.all(t_us % US == 0) else "us"
    return np.char.add(np.datetime_as_string(t_us.astype("datetime64[us]"), unit=unit), "Z")


@dataclass(frozen=True, slots=True)
class PositionRecord:
    timestamp: datetime
    mmsi: int
    lat: float
    lon: float
    sog: float | None = None
    cog: float | None = None
    nav_status: int | None = None

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"coordinate out of range: ({self.lat}, {self.lon})")
        if self.timestamp.tzinfo is None or self.timestamp < EARLIEST_VALID:
            raise ValueError(f"not a real UTC instant: {self.timestamp!r}")
        if not 0 < self.mmsi <= 999_999_999:
            raise ValueError(f"malformed MMSI {self.mmsi}")


@dataclass(frozen=True)
class AnalysisWindow:
    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("window bounds must be timezone-aware")
        if not self.start < self.end:
            raise ValueError(f"window start {self.start} is not before end {self.end}")

    @classmethod
    def parse(cls, start: str, end: str) -> AnalysisWindow:
        return cls(parse_utc(start), parse_utc(end))

    @property
    def start_us(self) -> int:
        return to_us(self.start)

    @property
    def end_us(self) -> int:
        return to_us(self.end)

    @property
    def length_us(self) -> int:
        return self.end_us - self.start_us

    @property
    def hours(self) -> float:
        return self.length_us / (3600 * US)


@dataclass(frozen=True)
class BBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if self.lat_min > self.lat_max or self.lon_min > self.lon_max:
            raise ValueError(f"inverted bounding box {self}")

    def contains(self, lat, lon):
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return (lat >= self.lat_min) & (lat <= self.lat_max) & (lon >= self.lon_min) & (lon <= self.lon_max)


@dataclass
class PositionTable:
    """Column-wise batch of position records. Missing sog/cog are NaN, missing nav_status is -1."""

    t_us: np.ndarray
    mmsi: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    sog: np.ndarray
    cog: np.ndarray
    nav_status: np.ndarray

    def __post_init__(self) -> None:
        self.t_us = np.asarray(self.t_us, dtype=np.int64)
        self.mmsi = np.asarray(self.mmsi, dtype=np.int64)
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        self.sog = np.asarray(self.sog, dtype=np.float64)
        self.cog = np.asarray(self.cog, dtype=np.float64)
        self.nav_status = np.asarray(self.nav_status, dtype=np.int16)
        n = len(self.t_us)
        if any(len(c) != n for c in self._columns()):
            raise ValueError("column length mismatch")

    def _columns(self):
        return (self.t_us, self.mmsi, self.lat, self.lon, self.sog, self.cog, self.nav_status)

    @classmethod
    def empty(cls) -> PositionTable:
        return cls(*(np.empty(0) for _ in range(7)))

    @classmethod
    def from_records(cls, records: Iterable[PositionRecord]) -> PositionTable:
        rows = list(records)
        if not rows:
            return cls.empty()
        return cls(
            [to_us(r.timestamp) for r in rows],
            [r.mmsi for r in rows],
            [r.lat for r in rows],
            [r.lon for r in rows],
            [np.nan if r.sog is None else r.sog for r in rows],
            [np.nan if r.cog is None else r.cog for r in rows],
            [-1 if r.nav_status is None else r.nav_status for r in rows],
        )

    @classmethod
    def concat(cls, tables: Iterable[PositionTable]) -> PositionTable:
        tables = list(tables)
        if not tables:
            return cls.empty()
        return cls(*(np.concatenate(cols) for cols in zip(*(t._columns() for t in tables))))

    def __len__(self) -> int:
        return len(self.t_us)

    def take(self, index) -> PositionTable:
        return PositionTable(*(c[index] for c in self._columns()))

    def record(self, i: int) -> PositionRecord:
        sog, cog, nav = self.sog[i], self.cog[i], self.nav_status[i]
        return PositionRecord(
            from_us(self.t_us[i]),
            int(self.mmsi[i]),
            float(self.lat[i]),
            float(self.lon[i]),
            None if math.isnan(sog) else float(sog),
            None if math.isnan(cog) else float(cog),
            None if nav < 0 else int(nav),
        )

    def __iter__(self) -> Iterator[PositionRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def equals(self, other: PositionTable) -> bool:
        return len(self) == len(other) and all(
            np.array_equal(a, b, equal_nan=a.dtype.kind == "f") for a, b in zip(self._columns(), other._columns())
        )


@dataclass
class Trajectory:
    """Time-sorted, duplicate-free fixes of one vessel."""

    mmsi: int | None
    table: PositionTable
    source: str = ""

    def __post_init__(self) -> None:
        if len(self.table) and np.any(np.diff(self.table.t_us) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        if len(self.table) and np.any(self.table.mmsi != self.mmsi):
            raise ValueError("trajectory mixes MMSIs")

    def __len__(self) -> int:
        return len(self.table)

    @property
    def t_us(self) -> np.ndarray:
        return self.table.t_us

    @property
    def lat(self) -> np.ndarray:
        return self.table.lat

    @property
    def lon(self) -> np.ndarray:
        return self.table.lon

    def take(self, index) -> Trajectory:
        return Trajectory(self.mmsi, self.table.take(index), self.source)


@dataclass
class IngestStats:
    rows_in: int = 0
    records_out: int = 0
    skipped: Counter = field(default_factory=Counter)

    def check(self) -> None:
        if self.rows_in != self.records_out + sum(self.skipped.values()):
            raise AssertionError(f"ingest accounting broken: {self}")

    def merge(self, other: IngestStats) -> None:
        self.rows_in += other.rows_in
        self.records_out += other.records_out
        self.skipped.update(other.skipped)

    def as_dict(self) -> dict:
        return {"rows_in": self.rows_in, "records_out": self.records_out, "skipped": dict(sorted(self.skipped.items()))}


def _nav_codes(col: pd.Series) -> np.ndarray:
    numeric = pd.to_numeric(col, errors="coerce")
    named = col.astype(str).str.strip().str.lower().map(NAV_STATUS_NAMES)
    codes = numeric.where(numeric.between(0, 15), named)
    return codes.fillna(-1).to_numpy(dtype=np.int16)


def parse_csv(
    stream: TextIO | str | Path,
    column_map: Mapping[str, str] = DMA_COLUMNS,
    timestamp_format: str | None = DMA_TIMESTAMP_FORMAT,
    utc_offset_h: float = 0.0,
) -> tuple[PositionTable, IngestStats]:
    """Parse a broker CSV export.

    ``column_map`` maps record fields (timestamp, mmsi, lat, lon and optionally
    sog, cog, nav_status) to header names.  ``timestamp_format`` is a strptime
    pattern, or None for ISO-8601.  Timestamps are shifted by ``-utc_offset_h``
    to land in UTC.  Invalid rows are skipped and counted by reason.
    """
    for required in ("timestamp", "mmsi", "lat", "lon"):
        if required not in column_map:
            raise SchemaError(f"column map lacks the {required!r} field")
    try:
        df = pd.read_csv(stream, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError("CSV has no header row") from exc
    missing = [col for col in column_map.values() if col not in df.columns]
    if missing:
        raise SchemaError(f"missing mapped column(s): {missing}")

    stats = IngestStats(rows_in=len(df))
    ts_text = df[column_map["timestamp"]].str.strip()
    if timestamp_format is None:
        ts = pd.to_datetime(ts_text, errors="coerce", utc=True, format="ISO8601")
    else:
        ts = pd.to_datetime(ts_text, errors="coerce", format=timestamp_format)
        if ts.dt.tz is None:
            ts = ts.dt.tz_localize("UTC")
        else:
            ts = ts.dt.tz_convert("UTC")
    ts = ts - pd.Timedelta(hours=utc_offset_h)
    mmsi = pd.to_numeric(df[column_map["mmsi"]], errors="coerce")
    lat = pd.to_numeric(df[column_map["lat"]], errors="coerce")
    lon = pd.to_numeric(df[column_map["lon"]], errors="coerce")

    bad_ts = ts.isna().to_numpy()
    placeholder = ~bad_ts & (ts < pd.Timestamp(EARLIEST_VALID)).fillna(False).to_numpy()
    bad_mmsi = ~(mmsi.notna() & (mmsi % 1 == 0) & (mmsi > 0) & (mmsi <= 999_999_999)).to_numpy()
    bad_num = (lat.isna() | lon.isna()).to_numpy()
    bad_range = ~bad_num & ~(lat.between(-90, 90) & lon.between(-180, 180)).to_numpy()

    reasons = [
        (bad_ts, "unparseable timestamp"),
        (placeholder, "placeholder timestamp"),
        (bad_mmsi, "malformed MMSI"),
        (bad_num, "unparseable coordinate"),
        (bad_range, "coordinate out of range"),
    ]
    drop = np.zeros(len(df), dtype=bool)
    for mask, reason in reasons:
        fresh = mask & ~drop
        if fresh.any():
            stats.skipped[reason] += int(fresh.sum())
        drop |= mask
    keep = ~drop

    def optional(name: str, conv):
        if name not in column_map:
            return np.full(int(keep.sum()), np.nan if name != "nav_status" else -1)
        return conv(df.loc[keep, column_map[name]])

    table = PositionTable(
        ts[keep].to_numpy(dtype="datetime64[us]").astype(np.int64),
        mmsi[keep].to_numpy(dtype=np.int64),
        lat[keep].to_numpy(),
        lon[keep].to_numpy(),
        optional("sog", lambda c: pd.to_numeric(c, errors="coerce").where(lambda s: s >= 0).to_numpy()),
        optional("cog", lambda c: pd.to_numeric(c, errors="coerce").where(lambda s: (s >= 0) & (s < 360)).to_numpy()),
        optional("nav_status", _nav_codes),
    )
    stats.records_out = len(table)
    stats.check()
    return table, stats


def read_interchange(path: str | Path | TextIO) -> PositionTable:
    """Read the canonical ``timestamp_utc,mmsi,lat,lon,sog,cog,nav_status`` CSV."""
    try:
        df = pd.read_csv(path, dtype={"timestamp_utc": str}, keep_default_na=True)
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: empty interchange file") from exc
    missing = [c for c in INTERCHANGE_HEADER if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing interchange column(s) {missing}")
    if df.empty:
        return PositionTable.empty()
    ts = pd.to_datetime(df["timestamp_utc"], utc=True, format="ISO8601", errors="coerce")
    if ts.isna().any():
        raise InputError(f"{path}: unparseable timestamp at row {int(ts.isna().to_numpy().argmax()) + 2}")
    return PositionTable(
        ts.to_numpy(dtype="datetime64[us]").astype(np.int64),
        df["mmsi"].to_numpy(dtype=np.int64),
        df["lat"].to_numpy(dtype=np.float64),
        df["lon"].to_numpy(dtype=np.float64),
        df["sog"].to_numpy(dtype=np.float64),
        df["cog"].to_numpy(dtype=np.float64),
        df["nav_status"].fillna(-1).to_numpy(dtype=np.int16),
    )


def interchange_csv(table: PositionTable) -> str:
    df = pd.DataFrame(
        {
            "timestamp_utc": format_utc(table.t_us),
            "mmsi": table.mmsi,
            "lat": table.lat,
            "lon": table.lon,
            "sog": table.sog,
            "cog": table.cog,
            "nav_status": pd.array(np.where(table.nav_status < 0, None, table.nav_status), dtype="Int16"),
        },
        columns=INTERCHANGE_HEADER,
    )
    buf = io.StringIO()
    df.to_csv(buf, index=False, float_format="%.7f", lineterminator="\n")
    return buf.getvalue()


def records_from_reports(reports) -> PositionTable:
    """PositionTable from decoder output; reports without a receive time are dropped."""
    rows = []
    for tr in reports:
        if tr.timestamp is None:
            continue
        r = tr.report
        rows.append(
            PositionRecord(
                datetime.fromtimestamp(tr.timestamp, tz=timezone.utc), r.mmsi, r.lat, r.lon, r.sog, r.cog, r.nav_status
            )
        )
    return PositionTable.from_records(rows)


def filter_records(
    table: PositionTable,
    mmsi: int | None = None,
    window: AnalysisWindow | None = None,
    bbox: BBox | None = None,
) -> PositionTable:
    """Rows matching every given predicate, in input order. Window bounds are inclusive."""
    keep = np.ones(len(table), dtype=bool)
    if mmsi is not None:
        keep &= table.mmsi == mmsi
    if window is not None:
        keep &= (table.t_us >= window.start_us) & (table.t_us <= window.end_us)
    if bbox is not None:
        keep &= bbox.contains(table.lat, table.lon)
    return table.take(np.flatnonzero(keep))


def build_trajectory(table: PositionTable, source: str = "") -> Trajectory:
    """Sort by time; of several records sharing a timestamp, the first in input order wins."""
    if len(table) == 0:
        return Trajectory(None, table, source)
    ids = np.unique(table.mmsi)
    if len(ids) > 1:
        raise InputError(f"build_trajectory got {len(ids)} MMSIs: {ids[:5].tolist()}")
    order = np.argsort(table.t_us, kind="stable")
    t_sorted = table.t_us[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = t_sorted[1:] != t_sorted[:-1]
    return Trajectory(int(ids[0]), table.take(order[first]), source)


def teleport_filter(traj: Trajectory, max_knots: float = 50.0) -> Trajectory:
    """Drop fixes that imply more than ``max_knots`` from the last retained fix."""
    n = len(traj)
    if n < 2:
        return traj
    t = traj.t_us / US
    lat, lon = traj.lat, traj.lon
    max_mps = max_knots * 1852.0 / 3600.0
    # fast path: only records flagged against their raw predecessor need the sequential pass
    step = haversine_np(lat[:-1], lon[:-1], lat[1:], lon[1:]) / np.diff(t)
    if not np.any(step > max_mps):
        return traj
    keep = np.ones(n, dtype=bool)
    last = 0
    for i in range(1, n):
        d = haversine_np(lat[last], lon[last], lat[i], lon[i])
        if d / (t[i] - t[last]) > max_mps:
            keep[i] = False
        else:
            last = i
    log.info("teleport filter dropped %d of %d fixes", n - int(keep.sum()), n)
    return traj.take(np.flatnonzero(keep))


@dataclass(frozen=True)
class SamplingReport:
    n_records: int
    median_gap_s: float
    mean_gap_s: float
    rate_hz: float
    largest_gaps: list[tuple[float, datetime, datetime]]

    def as_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "median_gap_s": self.median_gap_s,
            "mean_gap_s": self.mean_gap_s,
            "rate_hz": self.rate_hz,
            "largest_gaps": [
                {"gap_s": g, "from_utc": a.isoformat(), "to_utc": b.isoformat()} for g, a, b in self.largest_gaps
            ],
        }


def sampling_report(traj: Trajectory, top_n: int = 5) -> SamplingReport:
    if len(traj) < 2:
        raise InsufficientDataError("sampling report needs at least 2 records")
    gaps = np.diff(traj.t_us) / US
    median = float(np.median(gaps))
    order = np.argsort(-gaps, kind="stable")[:top_n]
    largest = [(float(gaps[i]), from_us(traj.t_us[i]), from_us(traj.t_us[i + 1])) for i in order]
    return SamplingReport(len(traj), median, float(gaps.mean()), 1.0 / median, largest)

"""End-to-end campaign analysis driven by a per-farm configuration."""

from __future__ import annotations

import contextlib
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import analytics, clustering, segmentation
from .errors import ConfigurationError, InputError, InsufficientDataError, JackupAisError
from .geo import GeoPoint
from .ingest import (
    DMA_COLUMNS,
    DMA_TIMESTAMP_FORMAT,
    AnalysisWindow,
    BBox,
    IngestStats,
    PositionTable,
    Trajectory,
    build_trajectory,
    filter_records,
    from_us,
    parse_csv,
    read_interchange,
    records_from_reports,
    sampling_report,
    teleport_filter,
)
from .nmea import AivdmDecoder, DecodeStats
from .segmentation import DwellSegment, HarborHint, InstallationRecord

log = logging.getLogger(__name__)


@contextlib.contextmanager
def stage(name: str):
    """Tag library errors with the pipeline stage they came from."""
    try:
        yield
    except JackupAisError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise
    except (ValueError, OSError) as exc:
        err = InputError(str(exc)) if isinstance(exc, OSError) else ConfigurationError(str(exc))
        err.stage = name
        raise err from exc


@dataclass
class FarmConfig:
    name: str
    n_turbines: int
    window: AnalysisWindow | None = None
    mmsi: int | None = None
    extra_clusters: int = 5
    seeds: list[int] = field(default_factory=lambda: [0])
    radius_m: float = 100.0
    min_segment_duration_h: float = 1.0
    min_points: int | None = None
    harbor_hint: HarborHint | None = None
    k_harbor: int = 4
    harbor_min_points: int | None = None
    farm_bbox: BBox | None = None
    ais_csv: list[Path] = field(default_factory=list)
    ais_format: str = "interchange"
    column_map: dict[str, str] | None = None
    timestamp_format: str | None = None
    utc_offset_h: float = 0.0
    aivdm: list[Path] = field(default_factory=list)
    wind_csv: Path | None = None
    out_dir: Path = Path("out")
    teleport_filter: bool = False
    max_knots: float = 50.0
    strict: bool = False

    def validate(self, check_paths: bool = True) -> None:
        if self.n_turbines < 1:
            raise ConfigurationError(f"n_turbines must be >= 1, got {self.n_turbines}")
        if self.extra_clusters < 0:
            raise ConfigurationError("extra_clusters must be >= 0")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.radius_m <= 0:
            raise ConfigurationError("radius_m must be positive")
        if self.min_points is not None and self.min_points < 1:
            raise ConfigurationError("min_points must be >= 1")
        if self.ais_format not in ("interchange", "dma", "custom"):
            raise ConfigurationError(f"unknown ais_format {self.ais_format!r}")
        if not self.ais_csv and not self.aivdm:
            raise ConfigurationError("no input files configured (ais_csv or aivdm)")
        if check_paths:
            for p in [*self.ais_csv, *self.aivdm, *([self.wind_csv] if self.wind_csv else [])]:
                if not Path(p).exists():
                    raise ConfigurationError(f"input file not found: {p}")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> FarmConfig:
        d = dict(d)
        base = Path(base_dir) if base_dir else Path(".")

        def path(p):
            p = Path(p)
            return p if p.is_absolute() else base / p

        known = {f.name for f in dataclasses.fields(cls)} | {"inputs"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {sorted(unknown)}")
        inputs = d.pop("inputs", {})
        for key in ("ais_csv", "aivdm", "wind_csv"):
            if key in inputs:
                d[key] = inputs[key]
        try:
            if d.get("window") is not None:
                w = d["window"]
                d["window"] = AnalysisWindow.parse(w["start"], w["end"])
            if d.get("harbor_hint") is not None:
                d["harbor_hint"] = HarborHint.from_dict(d["harbor_hint"])
            if d.get("farm_bbox") is not None:
                b = d["farm_bbox"]
                d["farm_bbox"] = BBox(**b) if isinstance(b, dict) else BBox(*b)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad config value: {exc}") from exc
        for key in ("ais_csv", "aivdm"):
            if key in d:
                v = d[key]
                d[key] = [path(p) for p in ([v] if isinstance(v, str) else v)]
        if d.get("wind_csv"):
            d["wind_csv"] = path(d["wind_csv"])
        if "out_dir" in d:
            d["out_dir"] = path(d["out_dir"])
        if "seed" in d:
            d["seeds"] = [d.pop("seed")]
        if "name" not in d or "n_turbines" not in d:
            raise ConfigurationError("config needs 'name' and 'n_turbines'")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path, **overrides) -> FarmConfig:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(raw, path.parent)

    def canonical(self) -> dict:
        """JSON-ready view used for hashing; output location is excluded."""
        return {
            "name": self.name,
            "n_turbines": self.n_turbines,
            "window": None
            if self.window is None
            else {"start": self.window.start.isoformat(), "end": self.window.end.isoformat()},
            "mmsi": self.mmsi,
            "extra_clusters": self.extra_clusters,
            "seeds": list(self.seeds),
            "radius_m": self.radius_m,
            "min_segment_duration_h": self.min_segment_duration_h,
            "min_points": self.min_points,
            "harbor_hint": None if self.harbor_hint is None else self.harbor_hint.as_dict(),
            "k_harbor": self.k_harbor,
            "harbor_min_points": self.harbor_min_points,
            "farm_bbox": None if self.farm_bbox is None else dict(self.farm_bbox.__dict__),
            "ais_csv": [Path(p).name for p in self.ais_csv],
            "ais_format": self.ais_format,
            "column_map": self.column_map,
            "timestamp_format": self.timestamp_format,
            "utc_offset_h": self.utc_offset_h,
            "aivdm": [Path(p).name for p in self.aivdm],
            "wind_csv": None if self.wind_csv is None else Path(self.wind_csv).name,
            "teleport_filter": self.teleport_filter,
            "max_knots": self.max_knots,
            "strict": self.strict,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class CampaignResult:
    config: FarmConfig
    trajectory: Trajectory
    window: AnalysisWindow
    ingest: IngestStats
    decode: DecodeStats | None
    sampling: Any
    model: clustering.ClusterModel
    clustered_index: np.ndarray  # trajectory indices fed to the clustering
    verdicts: list[clustering.ClusterVerdict]
    min_points: int
    installation_segments: list[DwellSegment]  # every segment, counted or not
    installations: list[InstallationRecord]
    harbor: segmentation.HarborResult
    harbor_counted: list[DwellSegment]
    labels: segmentation.PointLabels
    farm_stats: analytics.FarmStats
    harbor_stats: analytics.FarmStats | None
    time_share: analytics.TimeShare
    histogram: list[tuple[float, float]]
    naive_average_h: float
    naive_excess_pct: float
    wind_rows: list[analytics.WindJoinRow]
    input_digests: dict[str, str]

    @property
    def kept_centers(self) -> list[GeoPoint]:
        return [self.model.center(v.cluster) for v in self.verdicts if v.kept]


def load_inputs(cfg: FarmConfig) -> tuple[PositionTable, IngestStats, DecodeStats | None]:
    tables = []
    stats = IngestStats()
    for p in cfg.ais_csv:
        if cfg.ais_format == "interchange":
            t = read_interchange(p)
            s = IngestStats(len(t), len(t))
        else:
            cmap = cfg.column_map or DMA_COLUMNS
            fmt = cfg.timestamp_format if cfg.ais_format == "custom" else (cfg.timestamp_format or DMA_TIMESTAMP_FORMAT)
            t, s = parse_csv(p, cmap, fmt, cfg.utc_offset_h)
        tables.append(t)
        stats.merge(s)
    decode_stats = None
    if cfg.aivdm:
        dec = AivdmDecoder(strict=cfg.strict)
        reports = []
        for p in cfg.aivdm:
            with open(p, encoding="ascii", errors="replace") as fh:
                for line in fh:
                    reports.extend(dec.feed(line))
        dec.finish()
        decode_stats = dec.stats
        t = records_from_reports(reports)
        tables.append(t)
        stats.merge(IngestStats(len(reports), len(t), {"no timestamp": len(reports) - len(t)} if len(reports) > len(t) else {}))
    return PositionTable.concat(tables), stats, decode_stats


def run_analysis(cfg: FarmConfig) -> CampaignResult:
    with stage("config"):
        cfg.validate()
        k = clustering.select_k(cfg.n_turbines, cfg.extra_clusters)

    with stage("ais_ingest"):
        table, ingest_stats, decode_stats = load_inputs(cfg)
        mmsi = cfg.mmsi
        if mmsi is None:
            ids = np.unique(table.mmsi)
            if len(ids) != 1:
                raise ConfigurationError(f"inputs hold {len(ids)} vessels; set 'mmsi' in the config")
            mmsi = int(ids[0])
        table = filter_records(table, mmsi=mmsi, window=cfg.window)
        traj = build_trajectory(table, source=",".join(str(p) for p in [*cfg.ais_csv, *cfg.aivdm]))
        if cfg.teleport_filter:
            traj = teleport_filter(traj, cfg.max_knots)
        if len(traj) < 2:
            raise InsufficientDataError(f"only {len(traj)} record(s) for MMSI {mmsi} in the window")
        window = cfg.window or AnalysisWindow(from_us(traj.t_us[0]), from_us(traj.t_us[-1]))
        sampling = sampling_report(traj)

    with stage("harbor"):
        if cfg.harbor_hint is not None:
            harbor = segmentation.detect_harbor(
                traj, cfg.harbor_hint, cfg.k_harbor, cfg.harbor_min_points, cfg.radius_m, cfg.seeds
            )
        else:
            log.warning("no harbor hint configured; harbor time will be counted as transit")
            harbor = segmentation.HarborResult([])
        harbor_counted, _ = segmentation.split_by_duration(harbor.segments, cfg.min_segment_duration_h)

    with stage("clustering"):
        select = np.ones(len(traj), dtype=bool)
        if cfg.harbor_hint is not None:
            select &= ~cfg.harbor_hint.contains(traj.lat, traj.lon)
        if cfg.farm_bbox is not None:
            select &= cfg.farm_bbox.contains(traj.lat, traj.lon)
        idx = np.flatnonzero(select)
        sub = traj.take(idx)
        points = np.column_stack([sub.lat, sub.lon])
        model = clustering.restarts(points, k, cfg.seeds, timestamps=sub.t_us)
        min_points = cfg.min_points or clustering.default_min_points(len(sub))
        verdicts = clustering.discard_path_clusters(model, sub, min_points, cfg.radius_m)
        verdicts = clustering.suppress_overlapping(model, verdicts, 2 * cfg.radius_m)

    with stage("segmentation"):
        all_segments: list[DwellSegment] = []
        installations: list[InstallationRecord] = []
        for v in verdicts:
            if not v.kept:
                continue
            center = model.center(v.cluster)
            segs = segmentation.extract_dwell_segments(traj, center, cfg.radius_m, "installation", v.cluster)
            all_segments += segs
            counted, _ = segmentation.split_by_duration(segs, cfg.min_segment_duration_h)
            rec = segmentation.aggregate_installation(v.cluster, center, counted)
            if rec is not None:
                installations.append(rec)
        inst_us = sum(r.total_us for r in installations)
        harbor_us = sum(s.duration_us for s in harbor_counted)
        segmentation.compute_transit(window, inst_us, harbor_us)
        labels = segmentation.label_points(
            traj, [r.center for r in installations], harbor.centers, cfg.radius_m
        )

    with stage("analytics"):
        durations = [r.total_h for r in installations]
        fstats = analytics.farm_stats(durations, cfg.n_turbines)
        if fstats.median_h > fstats.avg_h:
            log.warning("median installation time %.1f h exceeds the mean %.1f h", fstats.median_h, fstats.avg_h)
        hstats = analytics.farm_stats([s.duration_h for s in harbor_counted]) if harbor_counted else None
        share = analytics.time_share_us(window, inst_us, harbor_us)
        hist = analytics.cumulative_histogram(durations)
        naive = analytics.naive_average(window, cfg.n_turbines)
        wind_rows: list[analytics.WindJoinRow] = []
        if cfg.wind_csv is not None:
            wt, wv = analytics.read_wind_csv(cfg.wind_csv)
            wind_rows = analytics.wind_join(installations, wt, wv)

    digests = {Path(p).name: file_digest(Path(p)) for p in [*cfg.ais_csv, *cfg.aivdm, *([cfg.wind_csv] if cfg.wind_csv else [])]}
    return CampaignResult(
        config=cfg,
        trajectory=traj,
        window=window,
        ingest=ingest_stats,
        decode=decode_stats,
        sampling=sampling,
        model=model,
        clustered_index=idx,
        verdicts=verdicts,
        min_points=min_points,
        installation_segments=all_segments,
        installations=installations,
        harbor=harbor,
        harbor_counted=harbor_counted,
        labels=labels,
        farm_stats=fstats,
        harbor_stats=hstats,
        time_share=share,
        histogram=hist,
        naive_average_h=naive,
        naive_excess_pct=analytics.naive_vs_measured(naive, fstats.avg_h),
        wind_rows=wind_rows,
        input_digests=digests,
    )

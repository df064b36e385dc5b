"""Report bundle: JSON document, CSV tables and a plain-text summary.

Every file is written to a temporary sibling and renamed into place, and the
report JSON goes last, so an interrupted run never leaves a partial report.
"""

from __future__ import annotations

import contextlib
import hashlib
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analytics import FarmStats
from .clustering import model_json
from .errors import InputError, SchemaError
from .geo import GeoPoint
from .ingest import format_utc, parse_utc, to_us
from .pipeline import CampaignResult
from .segmentation import LABELS, DwellSegment

SEGMENT_COLUMNS = [
    "kind",
    "cluster_id",
    "center_lat",
    "center_lon",
    "enter_utc",
    "exit_utc",
    "duration_h",
    "bracket_lo_utc",
    "bracket_hi_utc",
    "bracket_h",
]
HASH_EXCLUDED = ("generated_utc", "report_hash")


def atomic_write(path: Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def frame_csv(df: pd.DataFrame, float_format: str | None = None) -> str:
    buf = io.StringIO()
    df.to_csv(buf, index=False, lineterminator="\n", float_format=float_format)
    return buf.getvalue()


def segments_frame(segments: list[DwellSegment]) -> pd.DataFrame:
    rows = [
        (
            s.kind,
            s.cluster_id,
            s.center.lat,
            s.center.lon,
            s.enter_us,
            s.exit_us,
            s.duration_h,
            s.bracket_lo_us,
            s.bracket_hi_us,
            s.bracket_h,
        )
        for s in segments
    ]
    df = pd.DataFrame(rows, columns=SEGMENT_COLUMNS)
    for col in ("enter_utc", "exit_utc", "bracket_lo_utc", "bracket_hi_utc"):
        df[col] = format_utc(df[col].to_numpy(dtype=np.int64)) if len(df) else df[col]
    return df


def stats_frame(stats: FarmStats | None) -> pd.DataFrame:
    return pd.DataFrame([stats.as_dict()] if stats else [], columns=list(FarmStats.__dataclass_fields__))


def report_hash(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k not in HASH_EXCLUDED}
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def build_report(res: CampaignResult) -> dict:
    cfg = res.config
    installations = [
        {
            "cluster_id": r.cluster_id,
            "lat": r.center.lat,
            "lon": r.center.lon,
            "total_h": r.total_h,
            "uncertainty_hi_h": r.uncertainty_hi_h,
            "n_segments": r.n_segments,
        }
        for r in res.installations
    ]
    doc = {
        "farm": cfg.name,
        "generated_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "provenance": {
            "package_version": __version__,
            "config_hash": cfg.digest(),
            "config": cfg.canonical(),
            "seeds": list(cfg.seeds),
            "selected_seed": res.model.seed,
            "input_digests": res.input_digests,
        },
        "window": {
            "start_utc": res.window.start.isoformat(),
            "end_utc": res.window.end.isoformat(),
            "hours": res.window.hours,
        },
        "mmsi": res.trajectory.mmsi,
        "n_records": len(res.trajectory),
        "ingest": res.ingest.as_dict(),
        "decode": None if res.decode is None else res.decode.as_dict(),
        "sampling": res.sampling.as_dict(),
        "clustering": {**model_json(res.model, res.verdicts), "min_points": res.min_points, "n_points": len(res.clustered_index)},
        "installations": installations,
        "farm_stats": res.farm_stats.as_dict(),
        "harbor": {
            "centers": [{"lat": c.lat, "lon": c.lon} for c in res.harbor.centers],
            "n_segments": len(res.harbor_counted),
            "stats": None if res.harbor_stats is None else res.harbor_stats.as_dict(),
        },
        "time_share": res.time_share.as_dict(),
        "naive_average_h": res.naive_average_h,
        "naive_excess_pct": res.naive_excess_pct,
        "histogram": [[d, f] for d, f in res.histogram],
        "wind_join": [r.as_dict() for r in res.wind_rows],
        "labels": res.labels.counts(),
    }
    doc["report_hash"] = report_hash(doc)
    return doc


def summary_text(res: CampaignResult, doc: dict) -> str:
    fs = res.farm_stats
    ts = res.time_share
    lines = [
        f"Farm: {res.config.name}  (MMSI {res.trajectory.mmsi})",
        f"Window: {res.window.start.isoformat()} .. {res.window.end.isoformat()}  ({res.window.hours:.1f} h)",
        f"Records: {len(res.trajectory)}   median sampling gap {res.sampling.median_gap_s:.1f} s",
        f"Clusters: k={res.model.k}, kept {sum(v.kept for v in res.verdicts)}, seed {res.model.seed}",
        "",
        "Installations [h]",
        f"  identified {fs.n_identified} of {fs.n_actual} ({fs.coverage_pct} %)",
        f"  avg {fs.avg_h:.1f}  sd {fs.sd_h:.1f}  min {fs.min_h:.1f}  median {fs.median_h:.1f}  max {fs.max_h:.1f}",
    ]
    if res.harbor_stats is not None:
        hs = res.harbor_stats
        lines += [
            "Harbor [h]",
            f"  segments {hs.n_identified}  avg {hs.avg_h:.1f}  sd {hs.sd_h:.1f}  min {hs.min_h:.1f}"
            f"  median {hs.median_h:.1f}  max {hs.max_h:.1f}",
        ]
    lines += [
        "Time split [h / %]",
        f"  transit {ts.transit_h:.1f} / {ts.transit_pct:.1f}   installation {ts.installation_h:.1f} / "
        f"{ts.installation_pct:.1f}   harbor {ts.harbor_h:.1f} / {ts.harbor_pct:.1f}   total {ts.total_h:.1f}",
        f"Naive average: {res.naive_average_h:.2f} h per turbine ({res.naive_excess_pct:+.1f} % vs measured mean)",
        f"Report hash: {doc['report_hash']}",
    ]
    return "\n".join(lines) + "\n"


def write_bundle(res: CampaignResult, out_dir: str | Path) -> dict:
    """Write all exports for one campaign; returns the report document."""
    out = Path(out_dir)
    traj = res.trajectory
    doc = build_report(res)

    segs = sorted(
        res.installation_segments + res.harbor.segments, key=lambda s: (s.enter_us, s.kind, s.cluster_id)
    )
    atomic_write(out / "segments.csv", frame_csv(segments_frame(segs)))
    inst = pd.DataFrame(
        doc["installations"], columns=["cluster_id", "lat", "lon", "total_h", "uncertainty_hi_h", "n_segments"]
    ).rename(columns={"lat": "center_lat", "lon": "center_lon"})
    atomic_write(out / "installations.csv", frame_csv(inst))
    atomic_write(out / "farm_stats.csv", frame_csv(stats_frame(res.farm_stats)))
    atomic_write(out / "harbor_stats.csv", frame_csv(stats_frame(res.harbor_stats)))
    atomic_write(out / "time_share.csv", frame_csv(pd.DataFrame([res.time_share.as_dict()])))
    atomic_write(
        out / "histogram.csv",
        frame_csv(pd.DataFrame(res.histogram, columns=["duration_h", "cumulative_fraction"])),
    )
    atomic_write(
        out / "wind_join.csv",
        frame_csv(
            pd.DataFrame(
                [r.as_dict() for r in res.wind_rows if not r.flagged],
                columns=["cluster_id", "avg_wind_mps", "duration_h", "n_samples", "flagged"],
            )
        ),
    )
    atomic_write(out / "clusters.json", json.dumps(doc["clustering"], indent=1, sort_keys=True) + "\n")

    kept = np.array([v.kept for v in res.verdicts], dtype=bool)
    cluster = np.full(len(traj), -1, dtype=np.int64)
    cluster[res.clustered_index] = res.model.assignments
    ts = format_utc(traj.t_us)
    assign = pd.DataFrame(
        {
            "timestamp": ts[res.clustered_index],
            "lat": traj.lat[res.clustered_index],
            "lon": traj.lon[res.clustered_index],
            "cluster": res.model.assignments,
            "kept": kept[res.model.assignments].astype(np.int8),
        }
    )
    atomic_write(out / "assignments.csv", frame_csv(assign, "%.7f"))
    labeled = pd.DataFrame(
        {
            "timestamp": ts,
            "lat": traj.lat,
            "lon": traj.lon,
            "cluster": cluster,
            "kept": np.where(cluster >= 0, kept[np.maximum(cluster, 0)], False).astype(np.int8),
            "label": np.asarray(LABELS)[res.labels.codes],
        }
    )
    atomic_write(out / "labeled_points.csv", frame_csv(labeled, "%.7f"))
    nav = pd.DataFrame(
        {
            "timestamp": ts,
            "lat": traj.lat,
            "lon": traj.lon,
            "nav_status": pd.array(np.where(traj.table.nav_status < 0, None, traj.table.nav_status), dtype="Int16"),
            "label": labeled["label"],
        }
    )
    atomic_write(out / "nav_status.csv", frame_csv(nav, "%.7f"))
    atomic_write(out / "summary.txt", summary_text(res, doc))
    atomic_write(out / "report.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return doc


def read_segments_csv(path) -> list[DwellSegment]:
    """Inverse of the segments.csv export; instants are re-parsed to exact microseconds."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return []
    missing = set(SEGMENT_COLUMNS) - set(df.columns)
    if missing:
        raise SchemaError(f"segment CSV lacks column(s) {sorted(missing)}")
    out = []
    for i, row in enumerate(df.itertuples(index=False), start=2):
        try:
            out.append(
                DwellSegment(
                    cluster_id=int(row.cluster_id),
                    center=GeoPoint(float(row.center_lat), float(row.center_lon)),
                    enter_us=to_us(parse_utc(row.enter_utc)),
                    exit_us=to_us(parse_utc(row.exit_utc)),
                    bracket_lo_us=to_us(parse_utc(row.bracket_lo_utc)),
                    bracket_hi_us=to_us(parse_utc(row.bracket_hi_utc)),
                    kind=row.kind,
                )
            )
        except ValueError as exc:
            raise InputError(f"segment CSV line {i}: {exc}") from exc
        if row.kind not in ("installation", "harbor"):
            raise InputError(f"segment CSV line {i}: unknown kind {row.kind!r}")
    return out

"""Command-line entry point: ``jackup-ais {decode,analyze,synth,stats}``.

Exit codes: 0 success, 2 input or parse failure, 3 configuration or
consistency failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import pandas as pd

from . import __version__, analytics, segmentation
from .errors import ConfigurationError, InputError, JackupAisError
from .ingest import AnalysisWindow, PositionTable, interchange_csv, records_from_reports
from .nmea import AivdmDecoder
from .pipeline import FarmConfig, run_analysis, stage
from .report import atomic_write, frame_csv, read_segments_csv, stats_frame, write_bundle
from .synth import CampaignScript, dumps_truth, farm_bbox_for, generate_campaign, harbor_hint_for

log = logging.getLogger("jackup_ais")


def cmd_decode(inputs: list[Path], out: Path, strict: bool = False, stats_path: Path | None = None) -> dict:
    """Raw AIVDM files to an interchange CSV; returns the decode statistics."""
    with stage("decode"):
        dec = AivdmDecoder(strict=strict)
        reports = []
        for p in inputs:
            with open(p, encoding="ascii", errors="replace") as fh:
                for line in fh:
                    reports.extend(dec.feed(line))
        dec.finish()
        table = records_from_reports(reports) if reports else PositionTable.empty()
        atomic_write(out, interchange_csv(table))
        stats = {**dec.stats.as_dict(), "records_written": len(table)}
        if stats_path is not None:
            atomic_write(stats_path, json.dumps(stats, indent=1, sort_keys=True) + "\n")
    return stats


def config_overrides(args: argparse.Namespace) -> dict:
    over = {
        "radius_m": args.radius_m,
        "extra_clusters": args.extra_clusters,
        "min_points": args.min_points,
        "out_dir": args.out_dir,
    }
    if args.seed is not None:
        over["seeds"] = list(args.seed)
    if args.strict:
        over["strict"] = True
    return over


def cmd_analyze(cfg: FarmConfig, out_dir: Path | None = None) -> dict:
    res = run_analysis(cfg)
    with stage("report"):
        return write_bundle(res, out_dir or cfg.out_dir)


def synth_config(truth, csv_name: str = "campaign.csv", seeds=(0, 1, 2)) -> dict:
    """A farm config that analyzes a generated campaign.

    The cluster threshold is one hour of samples, matching the minimum
    segment duration.
    """
    s = truth.script
    return {
        "name": f"synthetic-{s.n_sites}-seed{s.seed}",
        "n_turbines": s.n_sites,
        "mmsi": s.mmsi,
        "window": {"start": truth.window.start.isoformat(), "end": truth.window.end.isoformat()},
        "seeds": list(seeds),
        "radius_m": s.radius_m,
        "min_segment_duration_h": s.min_duration_h,
        "min_points": math.ceil(s.min_duration_h * 3600 / s.sampling_s),
        "harbor_hint": harbor_hint_for(truth),
        "farm_bbox": farm_bbox_for(truth),
        "inputs": {"ais_csv": [csv_name]},
        "out_dir": "report",
    }


def cmd_synth(script: CampaignScript, out_dir: Path) -> dict:
    with stage("synth"):
        traj, truth = generate_campaign(script)
        out_dir = Path(out_dir)
        cfg = synth_config(truth)
        atomic_write(out_dir / "campaign.csv", interchange_csv(traj.table))
        atomic_write(out_dir / "truth.json", dumps_truth(truth) + "\n")
        atomic_write(out_dir / "farm.json", json.dumps(cfg, indent=1) + "\n")
    return {"records": len(traj), "sites": len(truth.sites), "port_calls": len(truth.port_calls), "config": cfg}


def cmd_stats(
    segments_csv: Path,
    window: AnalysisWindow | None,
    n_turbines: int | None,
    min_duration_h: float = 1.0,
    out_dir: Path | None = None,
) -> dict:
    """Recompute campaign statistics from an exported segment table."""
    with stage("stats"):
        segs = read_segments_csv(segments_csv)
        counted, _ = segmentation.split_by_duration(segs, min_duration_h)
        inst = [s for s in counted if s.kind == "installation"]
        harbor = [s for s in counted if s.kind == "harbor"]
        by_cluster: dict[int, list] = {}
        for s in inst:
            by_cluster.setdefault(s.cluster_id, []).append(s)
        records = [
            segmentation.aggregate_installation(cid, ss[0].center, ss) for cid, ss in sorted(by_cluster.items())
        ]
        durations = [r.total_h for r in records]
        fstats = analytics.farm_stats(durations, n_turbines)
        hstats = analytics.farm_stats([s.duration_h for s in harbor]) if harbor else None
        doc = {
            "farm_stats": fstats.as_dict(),
            "harbor_stats": None if hstats is None else hstats.as_dict(),
            "histogram": [list(p) for p in analytics.cumulative_histogram(durations)],
            "time_share": None,
            "naive_average_h": None,
        }
        share = None
        if window is not None:
            share = analytics.time_share_us(
                window, sum(r.total_us for r in records), sum(s.duration_us for s in harbor)
            )
            doc["time_share"] = share.as_dict()
            if n_turbines:
                doc["naive_average_h"] = analytics.naive_average(window, n_turbines)
        if out_dir is not None:
            out = Path(out_dir)
            atomic_write(out / "farm_stats.csv", frame_csv(stats_frame(fstats)))
            atomic_write(out / "harbor_stats.csv", frame_csv(stats_frame(hstats)))
            atomic_write(
                out / "histogram.csv", frame_csv(pd.DataFrame(doc["histogram"], columns=["duration_h", "cumulative_fraction"]))
            )
            if share is not None:
                atomic_write(out / "time_share.csv", frame_csv(pd.DataFrame([share.as_dict()])))
            atomic_write(out / "stats.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return doc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jackup-ais", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decode", help="decode raw AIVDM files to the interchange CSV")
    d.add_argument("inputs", nargs="+", type=Path)
    d.add_argument("-o", "--output", type=Path, required=True)
    d.add_argument("--stats", type=Path, help="also write decode statistics as JSON")
    d.add_argument("--strict", action="store_true", help="abort on the first malformed sentence")

    a = sub.add_parser("analyze", help="run the full campaign analysis from a farm config")
    a.add_argument("--config", type=Path, required=True)
    a.add_argument("--seed", type=int, action="append", help="k-means seed; repeat for restarts")
    a.add_argument("--radius-m", type=float)
    a.add_argument("--extra-clusters", type=int)
    a.add_argument("--min-points", type=int)
    a.add_argument("--out-dir", type=str)
    a.add_argument("--strict", action="store_true")

    s = sub.add_parser("synth", help="generate a synthetic campaign with ground truth")
    s.add_argument("script", nargs="?", type=Path, help="campaign script JSON (defaults if omitted)")
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--seed", type=int)

    t = sub.add_parser("stats", help="recompute statistics from a segments CSV")
    t.add_argument("segments", type=Path)
    t.add_argument("--config", type=Path, help="farm config supplying window and turbine count")
    t.add_argument("--window", nargs=2, metavar=("START", "END"))
    t.add_argument("--n-turbines", type=int)
    t.add_argument("--min-duration-h", type=float)
    t.add_argument("--out-dir", type=Path)
    return p


def _run(args: argparse.Namespace) -> int:
    if args.command == "decode":
        stats = cmd_decode(args.inputs, args.output, args.strict, args.stats)
        print(
            f"{stats['records_written']} records written to {args.output} "
            f"({stats['sentences']} sentences, {stats['checksum_failures']} checksum failures, "
            f"{stats['decode_errors']} decode errors, {stats['no_timestamp']} without timestamp)"
        )
    elif args.command == "analyze":
        with stage("config"):
            cfg = FarmConfig.load(args.config, **config_overrides(args))
        doc = cmd_analyze(cfg)
        fs = doc["farm_stats"]
        print(
            f"{doc['farm']}: {fs['n_identified']} installations ({fs['coverage_pct']} % coverage), "
            f"mean {fs['avg_h']:.1f} h; report in {cfg.out_dir}"
        )
        print(f"report hash {doc['report_hash']}")
    elif args.command == "synth":
        with stage("config"):
            raw = json.loads(args.script.read_text()) if args.script else {}
            if args.seed is not None:
                raw["seed"] = args.seed
            script = CampaignScript.from_dict(raw)
        info = cmd_synth(script, args.out_dir)
        print(
            f"{info['records']} records, {info['sites']} sites, {info['port_calls']} port calls written to {args.out_dir}"
        )
    elif args.command == "stats":
        with stage("config"):
            window, n, min_h = None, args.n_turbines, args.min_duration_h
            if args.config:
                cfg = FarmConfig.load(args.config)
                window = cfg.window
                n = n if n is not None else cfg.n_turbines
                min_h = min_h if min_h is not None else cfg.min_segment_duration_h
            if args.window:
                window = AnalysisWindow.parse(*args.window)
        doc = cmd_stats(args.segments, window, n, 1.0 if min_h is None else min_h, args.out_dir)
        print(json.dumps(doc, indent=1, sort_keys=True))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return _run(args)
    except JackupAisError as exc:
        where = getattr(exc, "stage", None)
        print(f"error [{where}]: {exc}" if where else f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())

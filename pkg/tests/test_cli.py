import json
from pathlib import Path

import pytest

from jackup_ais import __version__
from jackup_ais.cli import main
from jackup_ais.report import read_segments_csv

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def campaign(tmp_path_factory):
    d = tmp_path_factory.mktemp("campaign")
    script = d / "script.json"
    script.write_text(json.dumps({"n_sites": 6, "batch_size": 3, "gps_jitter_m": 5, "gap_probability": 0.01}))
    assert main(["synth", str(script), "--out-dir", str(d), "--seed", "4"]) == 0
    return d


@pytest.fixture(scope="module")
def analyzed(campaign):
    assert main(["analyze", "--config", str(campaign / "farm.json"), "--out-dir", "run1"]) == 0
    return campaign / "run1"


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0 and __version__ in capsys.readouterr().out


# --- decode -------------------------------------------------------------------------------


def test_decode_empty_file(tmp_path):
    src = tmp_path / "empty.nmea"
    src.write_text("")
    out, stats = tmp_path / "out.csv", tmp_path / "stats.json"
    assert main(["decode", str(src), "-o", str(out), "--stats", str(stats)]) == 0
    assert out.read_text().splitlines() == ["timestamp_utc,mmsi,lat,lon,sog,cog,nav_status"]
    doc = json.loads(stats.read_text())
    assert doc["sentences"] == 0 and doc["records_written"] == 0


def test_decode_bad_checksum_line(tmp_path):
    src = tmp_path / "bad.nmea"
    src.write_text("!AIVDM,1,1,,A,15M67FC000G?ufbE`FepT@3n00Sa,0*00\n")
    out, stats = tmp_path / "out.csv", tmp_path / "stats.json"
    assert main(["decode", str(src), "-o", str(out), "--stats", str(stats)]) == 0
    doc = json.loads(stats.read_text())
    assert doc["records_written"] == 0 and doc["checksum_failures"] == 1
    assert main(["decode", str(src), "-o", str(out), "--strict"]) == 2


def test_decode_corpus_counts(tmp_path):
    ref = json.loads((DATA / "aivdm_positions_reference.json").read_text())
    out, stats = tmp_path / "out.csv", tmp_path / "stats.json"
    assert main(["decode", str(DATA / "aivdm_positions.txt"), "-o", str(out), "--stats", str(stats)]) == 0
    doc = json.loads(stats.read_text())
    assert doc["checksum_failures"] == 0 and doc["decode_errors"] == 1
    # the corpus carries no receive timestamps, so positions are counted but not written
    assert doc["no_timestamp"] >= 100 and doc["records_written"] == 0
    assert len(ref) == 163


def test_decode_missing_input(tmp_path, capsys):
    assert main(["decode", str(tmp_path / "nope.nmea"), "-o", str(tmp_path / "o.csv")]) in (2, 3)
    assert "error [decode]" in capsys.readouterr().err


# --- analyze ------------------------------------------------------------------------------


def test_analyze_bundle(analyzed):
    names = {p.name for p in analyzed.iterdir()}
    for f in ("report.json", "segments.csv", "farm_stats.csv", "time_share.csv", "summary.txt", "assignments.csv"):
        assert f in names
    assert not [n for n in names if n.endswith(".tmp")]
    doc = json.loads((analyzed / "report.json").read_text())
    truth = json.loads((analyzed.parent / "truth.json").read_text())
    assert doc["farm_stats"]["n_identified"] == len(truth["sites"]) == 6
    ts = doc["time_share"]
    assert ts["transit_h"] + ts["installation_h"] + ts["harbor_h"] == pytest.approx(ts["total_h"], abs=1e-9)


def test_analyze_deterministic_hash(campaign, analyzed):
    assert main(["analyze", "--config", str(campaign / "farm.json"), "--out-dir", "run2"]) == 0
    a = json.loads((analyzed / "report.json").read_text())
    b = json.loads((campaign / "run2" / "report.json").read_text())
    assert a["report_hash"] == b["report_hash"]
    assert (analyzed / "segments.csv").read_bytes() == (campaign / "run2" / "segments.csv").read_bytes()


def test_zero_turbines_is_config_error(campaign, tmp_path, capsys):
    cfg = json.loads((campaign / "farm.json").read_text())
    cfg["n_turbines"] = 0
    cfg["inputs"]["ais_csv"] = [str(campaign / "campaign.csv")]
    p = tmp_path / "farm.json"
    p.write_text(json.dumps(cfg))
    assert main(["analyze", "--config", str(p)]) == 3
    assert "error [" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    p = tmp_path / "farm.json"
    p.write_text(json.dumps({"name": "x", "n_turbines": 3, "inputs": {"ais_csv": ["missing.csv"]}}))
    assert main(["analyze", "--config", str(p)]) in (2, 3)
    err = capsys.readouterr().err
    assert err.startswith("error [") and "missing.csv" in err


def test_missing_config(tmp_path, capsys):
    assert main(["analyze", "--config", str(tmp_path / "none.json")]) == 3
    assert "error [config]" in capsys.readouterr().err


# --- stats --------------------------------------------------------------------------------


def test_stats_reproduces_farm_stats(campaign, analyzed, tmp_path, capsys):
    capsys.readouterr()
    assert main(["stats", str(analyzed / "segments.csv"), "--config", str(campaign / "farm.json"), "--out-dir", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    rep = json.loads((analyzed / "report.json").read_text())
    for key in ("avg_h", "median_h", "n_identified", "coverage_pct"):
        assert doc["farm_stats"][key] == pytest.approx(rep["farm_stats"][key], abs=1e-9)
    assert doc["time_share"]["transit_h"] == pytest.approx(rep["time_share"]["transit_h"], abs=1e-9)
    assert (tmp_path / "stats.json").exists()


def test_segments_csv_round_trip(analyzed):
    segs = read_segments_csv(analyzed / "segments.csv")
    rep = json.loads((analyzed / "report.json").read_text())
    inst = [s for s in segs if s.kind == "installation"]
    assert {s.cluster_id for s in inst} >= {r["cluster_id"] for r in rep["installations"]}
    for s in segs:
        assert s.bracket_lo_us <= s.enter_us <= s.exit_us <= s.bracket_hi_us


def test_segments_csv_schema_error(tmp_path, capsys):
    p = tmp_path / "segs.csv"
    p.write_text("kind,cluster_id\ninstallation,0\n")
    assert main(["stats", str(p)]) == 2
    assert "error [stats]" in capsys.readouterr().err

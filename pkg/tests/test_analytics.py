import io
import math
import statistics

import numpy as np
import pytest
from helpers import CENTER, T0, window_hours
from hypothesis import given
from hypothesis import strategies as st

from jackup_ais.analytics import (
    cumulative_histogram,
    farm_stats,
    naive_average,
    naive_vs_measured,
    read_wind_csv,
    round_half_up,
    time_share,
    wind_join,
)
from jackup_ais.errors import InconsistencyError, InputError, InsufficientDataError, SchemaError
from jackup_ais.ingest import US
from jackup_ais.segmentation import HOUR_US, DwellSegment, InstallationRecord


def record(cid, *spans_h):
    segs = tuple(
        DwellSegment(cid, CENTER, T0 + round(a * HOUR_US), T0 + round(b * HOUR_US), T0 + round(a * HOUR_US), T0 + round(b * HOUR_US), "installation")
        for a, b in spans_h
    )
    return InstallationRecord(cid, CENTER, segs)


# --- farm_stats ----------------------------------------------------------------------------


def test_small_example():
    s = farm_stats([1, 2, 3], 3)
    assert (s.avg_h, s.sd_h, s.median_h, s.coverage_pct) == (2.0, 1.0, 2.0, 100)
    assert (s.min_h, s.max_h, s.n_identified) == (1.0, 3.0, 3)


def test_coverage_rounding():
    assert farm_stats([10.0] * 29, 35).coverage_pct == 83
    # exactly half rounds up
    assert farm_stats([1.0], 8).coverage_pct == 13  # 12.5


def test_even_median_and_single():
    assert farm_stats([1, 2, 3, 10]).median_h == 2.5
    s = farm_stats([7.5])
    assert s.sd_h == 0.0 and s.coverage_pct is None


def test_empty_is_error():
    with pytest.raises(InsufficientDataError):
        farm_stats([])


def test_over_identified_warns(caplog):
    farm_stats([1, 2, 3], 2)
    assert "only 2 turbines" in caplog.text


def test_against_statistics_module():
    d = np.random.default_rng(17).gamma(4.0, 12.0, 200).tolist()
    s = farm_stats(d, 210)
    assert s.avg_h == pytest.approx(statistics.fmean(d), rel=1e-12)
    assert s.sd_h == pytest.approx(statistics.stdev(d), rel=1e-10)
    assert s.median_h == statistics.median(d)
    assert (s.min_h, s.max_h) == (min(d), max(d))
    assert s.coverage_pct == math.floor(100 * 200 / 210 + 0.5)


@given(st.lists(st.floats(0.01, 1000), min_size=1, max_size=50))
def test_order_statistics(d):
    s = farm_stats(d)
    assert s.min_h <= s.median_h <= s.max_h


@pytest.mark.parametrize("x, nd, want", [(2.5, 0, 3.0), (83.5, 0, 84.0), (7.65, 1, 7.7), (-0.5, 0, 0.0)])
def test_round_half_up(x, nd, want):
    assert round_half_up(x, nd) == want


# --- histogram -------------------------------------------------------------------------------


def test_histogram_examples():
    h = dict(cumulative_histogram([40, 10, 30, 20]))
    assert h[20.0] == 0.5 and h[40.0] == 1.0
    assert cumulative_histogram([5.0]) == [(5.0, 1.0)]
    with pytest.raises(InsufficientDataError):
        cumulative_histogram([])


@given(st.lists(st.floats(0, 500), min_size=1, max_size=100))
def test_histogram_monotone(d):
    h = cumulative_histogram(d)
    xs, fs = zip(*h)
    assert list(xs) == sorted(xs) and list(fs) == sorted(fs)
    assert fs[-1] == 1.0 and all(0 < f <= 1 for f in fs)


def test_histogram_forty_percent_below_twenty_hours():
    rng = np.random.default_rng(23)
    d = np.concatenate([rng.uniform(8, 19.9, 40), rng.uniform(20.1, 60, 60)])
    below = [f for x, f in cumulative_histogram(d) if x < 20]
    assert below[-1] == pytest.approx(0.4, abs=1e-12)


# --- naive average and time share -------------------------------------------------------------------


def test_naive_average_reference_campaign():
    assert naive_average(window_hours(4932.5), 49) == pytest.approx(100.66, abs=0.05)
    assert naive_average(window_hours(100), 10) == 10.0
    assert naive_average(window_hours(49), 49) == 1.0


def test_naive_vs_measured_is_computed():
    # the ratio against a 57.6 h measured mean is about 74.7 %
    assert naive_vs_measured(4932.5 / 49, 57.6) == pytest.approx(74.76, abs=0.01)


def test_time_share_reference_campaign():
    ts = time_share(window_hours(4932.5), 2821, 1732)
    assert ts.transit_h == pytest.approx(379.5, abs=1e-9)
    assert (ts.transit_pct, ts.installation_pct, ts.harbor_pct) == (7.7, 57.2, 35.1)


@pytest.mark.parametrize("inst, harb, want", [(0, 0, (100.0, 0.0, 0.0)), (50, 50, (0.0, 50.0, 50.0))])
def test_time_share_trivial(inst, harb, want):
    ts = time_share(window_hours(100), inst, harb)
    assert (ts.transit_pct, ts.installation_pct, ts.harbor_pct) == want


def test_time_share_inconsistent():
    with pytest.raises(InconsistencyError):
        time_share(window_hours(10), 8, 3)


@given(st.floats(1, 10_000), st.floats(0, 1), st.floats(0, 1))
def test_time_share_sums(total, a, b):
    if a + b > 1:
        a, b = a / (a + b), b / (a + b)
    ts = time_share(window_hours(total), total * a * 0.999, total * b * 0.999)
    assert ts.transit_h + ts.installation_h + ts.harbor_h == pytest.approx(ts.total_h, rel=1e-12)
    assert abs(ts.transit_pct + ts.installation_pct + ts.harbor_pct - 100) <= 0.2


# --- wind join -----------------------------------------------------------------------------------


def test_wind_average_inside_segment():
    t = T0 + np.array([-1, 0.5, 1.5, 3]) * HOUR_US
    rows = wind_join([record(0, (0, 2))], t.astype(np.int64), [100.0, 5.0, 7.0, 100.0])
    assert rows[0].avg_wind_mps == 6.0 and not rows[0].flagged and rows[0].n_samples == 2


def test_wind_inclusive_endpoints_and_flag():
    t = T0 + np.array([0, 2]) * HOUR_US
    rows = wind_join([record(0, (0, 2)), record(1, (5, 6))], t, [4.0, 8.0])
    assert rows[0].avg_wind_mps == 6.0
    assert rows[1].flagged and rows[1].avg_wind_mps is None


def test_wind_unsorted_is_error():
    with pytest.raises(InputError):
        wind_join([record(0, (0, 1))], [T0 + 10, T0], [1.0, 2.0])


def test_wind_dense_vs_sparse_against_analytic_mean():
    def wind(h):
        return 8 + 3 * np.sin(2 * np.pi * h / 12.0)

    def exact(a, b):
        # integral of the wind function over [a, b] divided by its length
        F = lambda h: 8 * h - 3 * 12 / (2 * np.pi) * np.cos(2 * np.pi * h / 12.0)  # noqa: E731
        return (F(b) - F(a)) / (b - a)

    rec = record(0, (1.0, 7.0), (20.0, 23.5))
    truth = (exact(1, 7) * 6 + exact(20, 23.5) * 3.5) / 9.5
    for step_h, tol in [(1 / 60, 0.02), (1.0, 0.4)]:
        hours = np.arange(0, 30, step_h)
        t = (T0 + hours * HOUR_US).astype(np.int64)
        (row,) = wind_join([rec], t, wind(hours))
        assert row.avg_wind_mps == pytest.approx(truth, abs=tol)


def test_read_wind_csv():
    t, v = read_wind_csv(io.StringIO("timestamp_utc,wind_speed_mps\n2018-07-01T00:00:00Z,5.5\n2018-07-01T01:00:00Z,6\n"))
    assert t.tolist() == [T0, T0 + 3600 * US] and v.tolist() == [5.5, 6.0]
    with pytest.raises(SchemaError):
        read_wind_csv(io.StringIO("time,speed\n"))
    with pytest.raises(InputError):
        read_wind_csv(io.StringIO("timestamp_utc,wind_speed_mps\nbad,1\n"))

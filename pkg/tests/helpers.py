"""Small trajectory builders shared by the test modules."""

from datetime import datetime, timedelta, timezone

import numpy as np

from jackup_ais.geo import GeoPoint, offset
from jackup_ais.ingest import US, AnalysisWindow, PositionTable, Trajectory, to_us

T0_DT = datetime(2018, 7, 1, tzinfo=timezone.utc)
T0 = to_us(T0_DT)
CENTER = GeoPoint(55.69, 7.67)


def make_traj(t_s, lat, lon, mmsi: int = 219000001) -> Trajectory:
    t_s = np.asarray(t_s)
    n = len(t_s)
    t_us = T0 + np.round(t_s * US).astype(np.int64)
    table = PositionTable(
        t_us,
        np.full(n, mmsi),
        np.asarray(lat, dtype=float),
        np.asarray(lon, dtype=float),
        np.full(n, np.nan),
        np.full(n, np.nan),
        np.full(n, -1),
    )
    return Trajectory(mmsi, table)


def traj_from_offsets(t_s, north_m, east_m=None, center: GeoPoint = CENTER) -> Trajectory:
    """Trajectory whose fixes sit at given north/east offsets (meters) from ``center``."""
    north_m = np.asarray(north_m, dtype=float)
    east_m = np.zeros_like(north_m) if east_m is None else np.asarray(east_m, dtype=float)
    pts = [offset(center, n, e) for n, e in zip(north_m, east_m)]
    return make_traj(t_s, [p.lat for p in pts], [p.lon for p in pts])


def window_hours(hours: float) -> AnalysisWindow:
    return AnalysisWindow(T0_DT, T0_DT + timedelta(hours=hours))


# acceptance outcomes, one line per criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []


class criterion:
    """Record PASS/FAIL for one acceptance criterion around the block that checks it."""

    def __init__(self, tag: str, text: str):
        self.tag, self.text, self.detail = tag, text, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        verdict = "PASS" if exc_type is None else "FAIL"
        line = f"{self.tag} {verdict}: {self.text}"
        if self.detail:
            line += f" [{self.detail}]"
        if exc_type is not None and exc_type is not AssertionError:
            line += f" ({exc_type.__name__}: {exc})"
        ACCEPTANCE.append(line)
        print(line)
        return False

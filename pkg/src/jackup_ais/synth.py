"""Synthetic jackup campaigns with known answers.

A campaign alternates port calls at one of the harbor berths with voyages
that visit a batch of turbine sites.  Every scheduled stop is scripted as
the time the vessel spends inside ``radius_m`` of the stop: the vessel
crosses into the circle 1 % inside its edge, runs to the center, sits there
(with GPS jitter) and leaves the same way.  All schedule breakpoints fall on
the sampling grid, so with no jitter and no gaps the radius rule recovers
each scripted duration exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError
from .geo import EARTH_RADIUS_M, GeoPoint, degree_box, haversine_np, offset
from .ingest import US, AnalysisWindow, PositionTable, Trajectory, from_us, parse_utc, to_us

KNOT = 1852.0 / 3600.0
ENTRY_FRACTION = 0.99

NAV_UNDER_WAY = 0
NAV_AT_ANCHOR = 1
NAV_MOORED = 5
NAV_UNDEFINED = 15


@dataclass
class CampaignScript:
    n_sites: int = 20
    farm_origin: tuple[float, float] = (55.69, 7.67)
    site_spacing_m: float = 800.0
    layout_jitter_m: float = 80.0
    min_spacing_m: float = 500.0
    harbor: tuple[float, float] = (55.46, 8.43)
    n_berths: int = 2
    berth_spacing_m: float = 400.0
    harbor_entrance_m: float = 2500.0
    dwell_h: tuple[float, float] = (15.0, 45.0)
    port_call_h: tuple[float, float] = (12.0, 36.0)
    batch_size: int = 4
    transit_speed_kn: float = 10.0
    sampling_s: int = 10
    gps_jitter_m: float = 10.0
    gap_probability: float = 0.0
    gap_duration_s: tuple[float, float] = (10.0, 20.0)
    radius_m: float = 100.0
    min_duration_h: float = 1.0
    mmsi: int = 219000001
    start_utc: str = "2018-07-01T00:00:00Z"
    seed: int = 0

    def __post_init__(self) -> None:
        self.farm_origin = tuple(self.farm_origin)
        self.harbor = tuple(self.harbor)
        self.dwell_h = tuple(self.dwell_h)
        self.port_call_h = tuple(self.port_call_h)
        self.gap_duration_s = tuple(self.gap_duration_s)

    def validate(self) -> None:
        if self.n_sites < 1 or self.batch_size < 1 or self.n_berths < 1:
            raise ConfigurationError("n_sites, batch_size and n_berths must be positive")
        if self.min_spacing_m <= 2 * self.radius_m:
            raise ConfigurationError(
                f"minimum site spacing {self.min_spacing_m} m must exceed twice the radius ({2 * self.radius_m} m)"
            )
        if self.berth_spacing_m <= 2 * self.radius_m:
            raise ConfigurationError("berths must be more than two radii apart")
        if self.site_spacing_m - 2 * self.layout_jitter_m < self.min_spacing_m:
            raise ConfigurationError("grid spacing minus layout jitter violates the minimum spacing")
        for name in ("dwell_h", "port_call_h"):
            lo, hi = getattr(self, name)
            if not self.min_duration_h < lo <= hi:
                raise ConfigurationError(f"{name} range {lo}..{hi} must exceed the {self.min_duration_h} h minimum")
        if self.sampling_s <= 0 or self.transit_speed_kn <= 0:
            raise ConfigurationError("sampling interval and speed must be positive")
        if not 0 <= self.gap_probability < 1:
            raise ConfigurationError("gap probability must lie in [0, 1)")
        if not 0 <= self.gps_jitter_m < self.radius_m / 2:
            raise ConfigurationError("GPS jitter must be non-negative and under half the radius")

    @classmethod
    def from_dict(cls, d: dict) -> CampaignScript:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown campaign script field(s): {sorted(unknown)}")
        return cls(**d)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Visit:
    kind: str  # "installation" or "harbor"
    index: int  # site or berth index
    enter_us: int
    exit_us: int

    @property
    def duration_s(self) -> float:
        return (self.exit_us - self.enter_us) / US


@dataclass
class GroundTruth:
    sites: list[GeoPoint]
    berths: list[GeoPoint]
    site_dwell_s: list[float]
    visits: list[Visit]
    window: AnalysisWindow
    labels: np.ndarray  # per emitted sample: 0 transit, 1 installation, 2 harbor
    script: CampaignScript
    n_samples_scripted: int = 0
    n_samples_deleted: int = 0

    @property
    def port_calls(self) -> list[Visit]:
        return [v for v in self.visits if v.kind == "harbor"]

    @property
    def site_visits(self) -> list[Visit]:
        return [v for v in self.visits if v.kind == "installation"]

    def to_json(self) -> dict:
        codes = self.labels
        rle: list[list] = []
        if len(codes):
            cuts = np.flatnonzero(np.diff(codes)) + 1
            starts = np.concatenate(([0], cuts))
            ends = np.concatenate((cuts, [len(codes)]))
            names = ("transit", "installation", "harbor")
            rle = [[names[codes[s]], int(e - s)] for s, e in zip(starts, ends)]
        return {
            "script": self.script.as_dict(),
            "window": {"start_utc": self.window.start.isoformat(), "end_utc": self.window.end.isoformat()},
            "sites": [
                {"site": i, "lat": p.lat, "lon": p.lon, "dwell_s": d}
                for i, (p, d) in enumerate(zip(self.sites, self.site_dwell_s))
            ],
            "berths": [{"berth": i, "lat": p.lat, "lon": p.lon} for i, p in enumerate(self.berths)],
            "visits": [
                {
                    "kind": v.kind,
                    "index": v.index,
                    "enter_utc": from_us(v.enter_us).isoformat(),
                    "exit_utc": from_us(v.exit_us).isoformat(),
                    "duration_s": v.duration_s,
                }
                for v in self.visits
            ],
            "port_call_durations_s": [v.duration_s for v in self.port_calls],
            "samples_scripted": self.n_samples_scripted,
            "samples_deleted": self.n_samples_deleted,
            "labels_rle": rle,
        }


def _local_vec(frm: GeoPoint, to: GeoPoint) -> tuple[float, float]:
    """(north, east) meters from frm to to in frm's tangent plane."""
    k = math.pi / 180.0 * EARTH_RADIUS_M
    return (to.lat - frm.lat) * k, (to.lon - frm.lon) * k * math.cos(math.radians(frm.lat))


def _toward(center: GeoPoint, target: GeoPoint, dist_m: float) -> GeoPoint:
    n, e = _local_vec(center, target)
    norm = math.hypot(n, e)
    return offset(center, dist_m * n / norm, dist_m * e / norm)


def farm_layout(script: CampaignScript, rng: np.random.Generator) -> list[GeoPoint]:
    """Jittered grid of site positions, row by row."""
    cols = math.ceil(math.sqrt(script.n_sites))
    origin = GeoPoint(*script.farm_origin)
    sites = []
    for i in range(script.n_sites):
        r, c = divmod(i, cols)
        jn, je = rng.uniform(-script.layout_jitter_m, script.layout_jitter_m, size=2)
        sites.append(offset(origin, r * script.site_spacing_m + jn, c * script.site_spacing_m + je))
    lat = np.array([p.lat for p in sites])
    lon = np.array([p.lon for p in sites])
    d = haversine_np(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    np.fill_diagonal(d, np.inf)
    if d.min() <= max(script.min_spacing_m, 2 * script.radius_m):
        raise ConfigurationError(f"layout violates minimum spacing: closest pair {d.min():.1f} m")
    return sites


class _Timeline:
    """Piecewise-linear (in degrees) schedule of positions aligned to the sampling grid."""

    def __init__(self, t0_us: int, dt_s: int, speed_mps: float) -> None:
        self.t = t0_us
        self.dt_us = dt_s * US
        self.speed = speed_mps
        self.legs: list[tuple[int, int, GeoPoint, GeoPoint, bool, int]] = []
        self.pos: GeoPoint | None = None

    def _steps(self, dist_m: float) -> int:
        return max(1, math.ceil(dist_m / self.speed / (self.dt_us / US)))

    def move(self, to: GeoPoint, nav: int = NAV_UNDER_WAY) -> None:
        dist = float(haversine_np(self.pos.lat, self.pos.lon, to.lat, to.lon))
        dur = self._steps(dist) * self.dt_us
        self.legs.append((self.t, self.t + dur, self.pos, to, False, nav))
        self.t += dur
        self.pos = to

    def leg(self, dur_us: int, to: GeoPoint, nav: int) -> None:
        self.legs.append((self.t, self.t + dur_us, self.pos, to, False, nav))
        self.t += dur_us
        self.pos = to

    def hold(self, dur_us: int, nav: int) -> None:
        self.legs.append((self.t, self.t + dur_us, self.pos, self.pos, True, nav))
        self.t += dur_us


def _steps_us(hours: float, dt_s: int) -> int:
    return round(hours * 3600 / dt_s) * dt_s * US


def generate_campaign(script: CampaignScript) -> tuple[Trajectory, GroundTruth]:
    script.validate()
    rng = np.random.default_rng(script.seed)
    sites = farm_layout(script, rng)
    harbor = GeoPoint(*script.harbor)
    farm = GeoPoint(*script.farm_origin)
    berths = [
        _toward(harbor, GeoPoint(harbor.lat + 1.0, harbor.lon), i * script.berth_spacing_m) if i else harbor
        for i in range(script.n_berths)
    ]
    entrance = _toward(harbor, farm, script.harbor_entrance_m)

    dt = script.sampling_s
    r_in = ENTRY_FRACTION * script.radius_m
    t0 = to_us(parse_utc(script.start_utc))
    tl = _Timeline(t0, dt, script.transit_speed_kn * KNOT)
    inner_us = tl._steps(r_in) * tl.dt_us

    n_batches = math.ceil(script.n_sites / script.batch_size)
    site_dwell = [_steps_us(h, dt) for h in rng.uniform(*script.dwell_h, size=script.n_sites)]
    port_dwell = [_steps_us(h, dt) for h in rng.uniform(*script.port_call_h, size=n_batches)]
    site_nav = rng.choice([NAV_UNDER_WAY, NAV_AT_ANCHOR, NAV_MOORED, NAV_UNDEFINED], size=script.n_sites)
    for d in site_dwell + port_dwell:
        if d <= 2 * inner_us:
            raise ConfigurationError("scripted stop is shorter than the time to cross the radius")

    visits: list[Visit] = []

    def visit(kind: str, idx: int, center: GeoPoint, dur_us: int, arriving: bool, going_to: GeoPoint, nav: int):
        # arriving: the vessel sits on the entry point, 1 % inside the radius
        enter = tl.t
        if arriving:
            tl.leg(inner_us, center, nav)
            tl.hold(dur_us - 2 * inner_us, nav)
        else:
            tl.pos = center
            tl.hold(dur_us - inner_us, nav)
        tl.leg(inner_us, _toward(center, going_to, r_in), nav)
        visits.append(Visit(kind, idx, enter, tl.t))

    order = list(range(script.n_sites))
    prev_stop: GeoPoint | None = None
    for b in range(n_batches):
        berth_i = b % script.n_berths
        berth = berths[berth_i]
        if prev_stop is not None:
            tl.move(entrance)
            tl.move(_toward(berth, entrance, r_in))
        visit("harbor", berth_i, berth, port_dwell[b], prev_stop is not None, entrance, NAV_MOORED)
        tl.move(entrance)
        batch = order[b * script.batch_size : (b + 1) * script.batch_size]
        came = entrance
        for j, s in enumerate(batch):
            nxt = sites[batch[j + 1]] if j + 1 < len(batch) else entrance
            tl.move(_toward(sites[s], came, r_in))
            visit("installation", s, sites[s], site_dwell[s], True, nxt, int(site_nav[s]))
            came = sites[s]
        prev_stop = came
    tl.move(entrance)
    t_end = tl.t

    table, labels, n_scripted, n_deleted = _sample(tl, script, rng, sites, berths, t0, t_end)
    traj = Trajectory(script.mmsi, table, source=f"synthetic seed={script.seed}")
    truth = GroundTruth(
        sites=sites,
        berths=berths,
        site_dwell_s=[d / US for d in site_dwell],
        visits=visits,
        window=AnalysisWindow(from_us(t0), from_us(t_end)),
        labels=labels,
        script=script,
        n_samples_scripted=n_scripted,
        n_samples_deleted=n_deleted,
    )
    return traj, truth


def _sample(tl: _Timeline, script, rng, sites, berths, t0: int, t_end: int):
    dt_us = script.sampling_s * US
    t = np.arange(t0, t_end + 1, dt_us, dtype=np.int64)
    starts = np.array([leg[0] for leg in tl.legs], dtype=np.int64)
    bounds = np.searchsorted(t, starts, side="left").tolist() + [len(t)]
    lat = np.empty(len(t))
    lon = np.empty(len(t))
    sog = np.empty(len(t))
    cog = np.full(len(t), np.nan)
    nav = np.empty(len(t), dtype=np.int16)
    stationary = np.zeros(len(t), dtype=bool)
    for i, (a, b, p0, p1, still, code) in enumerate(tl.legs):
        idx = slice(bounds[i], bounds[i + 1])
        if bounds[i] == bounds[i + 1]:
            continue
        f = (t[idx] - a) / (b - a)
        lat[idx] = p0.lat + f * (p1.lat - p0.lat)
        lon[idx] = p0.lon + f * (p1.lon - p0.lon)
        nav[idx] = code
        if still:
            stationary[idx] = True
            sog[idx] = 0.0
        else:
            n, e = _local_vec(p0, p1)
            sog[idx] = math.hypot(n, e) / ((b - a) / US) / KNOT
            cog[idx] = math.degrees(math.atan2(e, n)) % 360.0

    if script.gps_jitter_m > 0:
        idx = np.flatnonzero(stationary)
        rad = script.gps_jitter_m * np.sqrt(rng.random(len(idx)))
        ang = 2 * np.pi * rng.random(len(idx))
        k = math.pi / 180.0 * EARTH_RADIUS_M
        lat[idx] += rad * np.cos(ang) / k
        lon[idx] += rad * np.sin(ang) / (k * np.cos(np.radians(lat[idx])))

    labels = _true_labels(lat, lon, sites, berths, script.radius_m)

    keep = np.ones(len(t), dtype=bool)
    if script.gap_probability > 0:
        first = np.flatnonzero(rng.random(len(t)) < script.gap_probability)
        lengths = np.round(rng.uniform(*script.gap_duration_s, size=len(first)) * US).astype(np.int64)
        last = np.searchsorted(t, t[first] + lengths, side="left")
        # mark [first, last) via a difference array
        delta = np.zeros(len(t) + 1, dtype=np.int64)
        np.add.at(delta, first, 1)
        np.add.at(delta, last, -1)
        keep = np.cumsum(delta[:-1]) == 0
    n_deleted = int((~keep).sum())
    table = PositionTable(
        t[keep],
        np.full(int(keep.sum()), script.mmsi),
        np.round(lat[keep], 7),
        np.round(lon[keep], 7),
        np.round(sog[keep], 1),
        np.round(cog[keep], 1),
        nav[keep],
    )
    return table, labels[keep], len(t), n_deleted


def _true_labels(lat, lon, sites, berths, radius_m) -> np.ndarray:
    codes = np.zeros(len(lat), dtype=np.int8)
    for code, points in ((2, berths), (1, sites)):
        for p in points:
            dlat, dlon = degree_box(p, radius_m)
            cand = np.flatnonzero((np.abs(lat - p.lat) <= dlat) & (np.abs(lon - p.lon) <= dlon))
            hit = cand[haversine_np(p.lat, p.lon, lat[cand], lon[cand]) <= radius_m]
            codes[hit] = code
    return codes


def _bbox_around(points: list[GeoPoint], margin_m: float) -> list[float]:
    lat = [p.lat for p in points]
    lon = [p.lon for p in points]
    k = math.pi / 180.0 * EARTH_RADIUS_M
    dlat = margin_m / k
    dlon = margin_m / (k * math.cos(math.radians(max(abs(x) for x in lat))))
    return [min(lat) - dlat, max(lat) + dlat, min(lon) - dlon, max(lon) + dlon]


def farm_bbox_for(truth: GroundTruth, margin_m: float = 1500.0) -> list[float]:
    """[lat_min, lat_max, lon_min, lon_max] around the turbine sites."""
    return _bbox_around(truth.sites, margin_m)


def harbor_hint_for(truth: GroundTruth, margin_m: float = 1000.0) -> dict:
    """Harbor hint covering the berths and the harbor entrance."""
    s = truth.script
    pts = list(truth.berths) + [_toward(GeoPoint(*s.harbor), GeoPoint(*s.farm_origin), s.harbor_entrance_m)]
    return {"bbox": _bbox_around(pts, margin_m)}


def dumps_truth(truth: GroundTruth) -> str:
    return json.dumps(truth.to_json(), indent=1, sort_keys=True)

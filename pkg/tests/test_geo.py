import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jackup_ais.geo import EARTH_RADIUS_M, GeoPoint, degree_box, equirectangular, haversine, haversine_np, offset

lats = st.floats(-89.9, 89.9)
lons = st.floats(-180, 180)


def vincenty_sphere(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance via the atan2 form; independent of the haversine formula."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dl = math.radians(b.lon - a.lon)
    num = math.hypot(math.cos(p2) * math.sin(dl), math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl))
    den = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return EARTH_RADIUS_M * math.atan2(num, den)


def test_closed_form_values():
    # one degree of latitude is R * pi / 180
    assert haversine(GeoPoint(0, 0), GeoPoint(1, 0)) == pytest.approx(EARTH_RADIUS_M * math.pi / 180, rel=1e-12)
    assert haversine(GeoPoint(0, 0), GeoPoint(0, 90)) == pytest.approx(EARTH_RADIUS_M * math.pi / 2, rel=1e-12)
    assert haversine(GeoPoint(90, 0), GeoPoint(-90, 0)) == pytest.approx(EARTH_RADIUS_M * math.pi, rel=1e-12)
    assert haversine(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(EARTH_RADIUS_M * math.pi, rel=1e-12)
    # along a parallel the chord angle follows from the spherical law of cosines
    lat = 55.0
    c = math.sin(math.radians(lat)) ** 2 + math.cos(math.radians(lat)) ** 2 * math.cos(math.radians(1.0))
    assert haversine(GeoPoint(lat, 7), GeoPoint(lat, 8)) == pytest.approx(EARTH_RADIUS_M * math.acos(c), rel=1e-9)


def test_identity():
    p = GeoPoint(55.69, 7.67)
    assert haversine(p, p) == 0.0


@given(lats, lons, lats, lons)
def test_symmetric_and_matches_second_formula(a1, o1, a2, o2):
    a, b = GeoPoint(a1, o1), GeoPoint(a2, o2)
    d = haversine(a, b)
    assert d == pytest.approx(haversine(b, a), abs=1e-6)
    assert 0 <= d <= math.pi * EARTH_RADIUS_M + 1e-6
    assert d == pytest.approx(vincenty_sphere(a, b), abs=1e-3)


@given(lats, lons, lats, lons, lats, lons)
def test_triangle_inequality(a1, o1, a2, o2, a3, o3):
    a, b, c = GeoPoint(a1, o1), GeoPoint(a2, o2), GeoPoint(a3, o3)
    assert haversine(a, c) <= haversine(a, b) + haversine(b, c) + 1e-6


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(3)
    la1, la2 = rng.uniform(-80, 80, (2, 50))
    lo1, lo2 = rng.uniform(-180, 180, (2, 50))
    vec = haversine_np(la1, lo1, la2, lo2)
    for i in range(50):
        assert vec[i] == pytest.approx(haversine(GeoPoint(la1[i], lo1[i]), GeoPoint(la2[i], lo2[i])), rel=1e-12)


@pytest.mark.parametrize("lat, lon", [(91, 0), (-91, 0), (0, 181), (0, -180.5)])
def test_geopoint_range(lat, lon):
    with pytest.raises(ValueError):
        GeoPoint(lat, lon)


@given(st.floats(-70, 70), st.floats(-170, 170), st.floats(-150, 150), st.floats(-150, 150))
def test_offset_distance_and_equirectangular(lat, lon, north, east):
    o = GeoPoint(lat, lon)
    p = offset(o, north, east)
    assert haversine(o, p) == pytest.approx(math.hypot(north, east), abs=1e-3 + 1e-4 * math.hypot(north, east))
    assert equirectangular(o, p) == pytest.approx(haversine(o, p), abs=1e-3)


@given(st.floats(-80, 80), st.floats(-179, 179), st.floats(1, 5000), st.floats(0, 2 * math.pi))
def test_degree_box_contains_circle(lat, lon, r, theta):
    c = GeoPoint(lat, lon)
    dlat, dlon = degree_box(c, r)
    p = offset(c, 0.999 * r * math.cos(theta), 0.999 * r * math.sin(theta))
    assert abs(p.lat - lat) <= dlat
    assert abs(p.lon - lon) <= dlon

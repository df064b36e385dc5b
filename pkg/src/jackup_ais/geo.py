"""Great-circle distances on a spherical Earth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"coordinate out of range: lat={self.lat}, lon={self.lon}")


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Distance in meters between two points."""
    return float(haversine_np(a.lat, a.lon, b.lat, b.lon))


def haversine_np(lat1, lon1, lat2, lon2):
    """Vectorized haversine; arguments broadcast like numpy arrays, degrees in, meters out."""
    lat1 = np.radians(lat1)
    lat2 = np.radians(lat2)
    dlat = lat2 - lat1
    dlon = np.radians(np.subtract(lon2, lon1))
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    # clip guards against h drifting a hair above 1 for antipodal points
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def equirectangular(a: GeoPoint, b: GeoPoint) -> float:
    """Flat-Earth approximation, good for short distances away from the poles."""
    mean_lat = math.radians((a.lat + b.lat) / 2.0)
    x = math.radians(b.lon - a.lon) * math.cos(mean_lat)
    y = math.radians(b.lat - a.lat)
    return EARTH_RADIUS_M * math.hypot(x, y)


def offset(origin: GeoPoint, north_m: float, east_m: float) -> GeoPoint:
    """Point displaced by a small local north/east offset in meters."""
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
    return GeoPoint(origin.lat + dlat, origin.lon + dlon)


def degree_box(center: GeoPoint, radius_m: float) -> tuple[float, float]:
    """Half-widths (dlat, dlon) in degrees of a box that contains the radius_m circle."""
    dlat = math.degrees(radius_m / EARTH_RADIUS_M)
    coslat = max(math.cos(math.radians(abs(center.lat) + dlat)), 1e-6)
    return dlat * 1.01, min(dlat / coslat * 1.01, 360.0)

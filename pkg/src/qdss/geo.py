"""Great-circle geometry on a spherical Earth (R = 6371 km)."""

from __future__ import annotations

import math
from typing import Iterable

from .errors import ValidationError

EARTH_RADIUS_KM = 6371.0


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Distance in kilometers between two (lat, lon) points given in degrees."""
    for name, lat in (("lat1", lat1), ("lat2", lat2)):
        if not -90 <= lat <= 90:
            raise ValidationError(f"{name}: {lat} outside [-90, 90]", name)
    for name, lon in (("lon1", lon1), ("lon2", lon2)):
        if not -180 <= lon <= 180:
            raise ValidationError(f"{name}: {lon} outside [-180, 180]", name)
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return EARTH_RADIUS_KM * 2 * math.asin(math.sqrt(a))


def nearest(lat: float, lon: float, points: Iterable[tuple[str, float, float]]) -> str | None:
    """Id of the closest (id, lat, lon) point; ties broken by id. None if empty."""
    best: tuple[float, str] | None = None
    for pid, plat, plon in points:
        key = (haversine_km(lat, lon, plat, plon), pid)
        if best is None or key < best:
            best = key
    return best[1] if best else None

"""Flat-Earth geometry helpers, valid at the tens-of-meters scale of a turn."""

from __future__ import annotations

import numpy as np

from .signals import EARTH_RADIUS_M


def local_xy(lat, lon, ref_lat: float, ref_lon: float):
    """Project WGS84 degrees to meters east (x) / north (y) of a reference.

    Equirectangular approximation scaled by cos(ref_lat); sub-centimeter
    error within a few hundred meters of the reference point.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    x = np.radians(lon - ref_lon) * EARTH_RADIUS_M * np.cos(np.radians(ref_lat))
    y = np.radians(lat - ref_lat) * EARTH_RADIUS_M
    return x, y


def latlon_from_xy(x, y, ref_lat: float, ref_lon: float):
    """Inverse of :func:`local_xy`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lat = ref_lat + np.degrees(y / EARTH_RADIUS_M)
    lon = ref_lon + np.degrees(x / (EARTH_RADIUS_M * np.cos(np.radians(ref_lat))))
    return lat, lon


def distance_m(lat, lon, ref_lat: float, ref_lon: float):
    """Distance in meters from (lat, lon) points to the reference point."""
    x, y = local_xy(lat, lon, ref_lat, ref_lon)
    return np.hypot(x, y)


def step_lengths_m(lat, lon, ref_lat: float, ref_lon: float):
    """Lengths of consecutive polyline steps, in meters."""
    x, y = local_xy(lat, lon, ref_lat, ref_lon)
    return np.hypot(np.diff(x), np.diff(y))

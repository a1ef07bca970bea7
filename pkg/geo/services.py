#
# geo/services.py
#
"""
Ellipsoidal Mercator projection. Everything downstream (VED, grid projection,
DTW) measures distances in the planar meters produced here.
"""
from __future__ import annotations

import math

import numpy as np

from core.exceptions import ProjectionDomainError
from .models import CartesianPoint, EllipsoidParams, GeoPoint

_PI_4 = math.pi / 4


def standard_parallel_radius(ell: EllipsoidParams) -> float:
    """Radius r0 of the standard parallel circle."""
    phi0 = ell.phi0_standard_parallel
    e = ell.e_first_eccentricity
    return ell.a_semi_major * math.cos(phi0) / math.sqrt(1.0 - e * e * math.sin(phi0) ** 2)


def isometric_latitude(lat, e: float):
    """
    q = ln tan(pi/4 + lat/2) + (e/2) ln((1 - e sin lat) / (1 + e sin lat)).

    Accepts a float or a numpy array of radians. e = 0 is the spherical case.
    """
    lat_arr = np.asarray(lat, dtype=np.float64)
    if not np.all(np.abs(lat_arr) < math.pi / 2):
        raise ProjectionDomainError("isometric latitude diverges at the poles")
    sin_lat = np.sin(lat_arr)
    q = np.log(np.tan(_PI_4 + lat_arr / 2.0))
    if e:
        q = q + (e / 2.0) * np.log((1.0 - e * sin_lat) / (1.0 + e * sin_lat))
    return float(q) if np.ndim(q) == 0 else q


def project_arrays(lon: np.ndarray, lat: np.ndarray, ell: EllipsoidParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of radian arrays; used once at ingest."""
    r0 = standard_parallel_radius(ell)
    lon = np.asarray(lon, dtype=np.float64)
    if not np.all(np.abs(lon) <= math.pi):
        raise ProjectionDomainError("longitude outside [-pi, pi]")
    x = lon * r0
    y = np.asarray(isometric_latitude(lat, ell.e_first_eccentricity), dtype=np.float64) * r0
    return x, y


def mercator_project(p: GeoPoint, ell: EllipsoidParams) -> CartesianPoint:
    x, y = project_arrays(np.array([p.lon]), np.array([p.lat]), ell)
    return CartesianPoint(float(x[0]), float(y[0]))

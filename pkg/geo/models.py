#
# geo/models.py
#
from __future__ import annotations

import math
from dataclasses import dataclass

from django.conf import settings

from core.exceptions import ProjectionDomainError


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """Longitude/latitude in radians. Input files carry degrees; see from_degrees."""
    lon: float
    lat: float

    def __post_init__(self):
        if not abs(self.lat) < math.pi / 2:
            raise ProjectionDomainError(f"latitude {self.lat!r} rad is at or beyond a pole")
        if not abs(self.lon) <= math.pi:
            raise ProjectionDomainError(f"longitude {self.lon!r} rad is outside [-pi, pi]")

    @classmethod
    def from_degrees(cls, lon_deg: float, lat_deg: float) -> GeoPoint:
        return cls(math.radians(lon_deg), math.radians(lat_deg))


@dataclass(frozen=True, slots=True)
class CartesianPoint:
    """Projected position in meters."""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ProjectionDomainError(f"non-finite projected point ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class EllipsoidParams:
    a_semi_major: float
    e_first_eccentricity: float
    phi0_standard_parallel: float = 0.0

    def __post_init__(self):
        if not self.a_semi_major > 0:
            raise ProjectionDomainError("semi-major axis must be positive")
        if not 0 <= self.e_first_eccentricity < 1:
            raise ProjectionDomainError("first eccentricity must lie in [0, 1)")
        if not abs(self.phi0_standard_parallel) < math.pi / 2:
            raise ProjectionDomainError("standard parallel must lie strictly between the poles")

    @classmethod
    def from_settings(cls) -> EllipsoidParams:
        return cls(
            a_semi_major=settings.TRAJFORGE_ELLIPSOID_A,
            e_first_eccentricity=settings.TRAJFORGE_ELLIPSOID_E,
            phi0_standard_parallel=math.radians(settings.TRAJFORGE_STANDARD_PARALLEL_DEG),
        )


WGS84 = EllipsoidParams(a_semi_major=6378137.0, e_first_eccentricity=0.0818191908426)

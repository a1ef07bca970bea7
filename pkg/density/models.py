#
# density/models.py
#
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from core.exceptions import GridSpecError, KernelSpecError

KERNEL_FAMILIES = (
    "uniform",
    "triangular",
    "epanechnikov",
    "quartic",
    "triweight",
    "tricube",
    "gaussian",
    "cosine",
)

_GRID_SIZE = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


def parse_grid_size(text: str) -> tuple[int, int]:
    """'1024x768' -> (u, v) = (1024, 768), columns first."""
    match = _GRID_SIZE.match(text or "")
    if not match:
        raise GridSpecError(f"grid must look like UxV, got {text!r}")
    u, v = int(match.group(1)), int(match.group(2))
    if u < 2 or v < 2:
        raise GridSpecError(f"grid needs at least 2x2 cells, got {u}x{v}")
    return u, v


@dataclass(frozen=True, slots=True)
class GridCell:
    """1-based cell coordinates: x in [1, u] (column), y in [1, v] (row)."""
    x: int
    y: int


@dataclass(frozen=True, slots=True)
class GridSpec:
    u: int
    v: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.u < 2 or self.v < 2:
            raise GridSpecError(f"grid needs at least 2x2 cells, got {self.u}x{self.v}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GridSpecError("grid bounds must have x_max > x_min and y_max > y_min")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return self.x_min, self.x_max, self.y_min, self.y_max

    @classmethod
    def covering(cls, bounds: tuple[float, float, float, float], u: int | None = None, v: int | None = None) -> GridSpec:
        """
        Grid over data bounds. A flat axis (all points on one line) is widened
        by half a meter each way so the grid stays valid.
        """
        if u is None or v is None:
            u, v = parse_grid_size(settings.TRAJFORGE_GRID)
        x_min, x_max, y_min, y_max = bounds
        if x_max <= x_min:
            x_min, x_max = x_min - 0.5, x_max + 0.5
        if y_max <= y_min:
            y_min, y_max = y_min - 0.5, y_max + 0.5
        return cls(u, v, x_min, x_max, y_min, y_max)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Cell intensities stored as a (v, u) array: row ``y - 1``, column ``x - 1``.

    ``skipped_points`` counts points that fell outside the grid and
    ``interpolated_cells`` the increments added by gap interpolation.
    """
    cells: np.ndarray
    skipped_points: int = 0
    interpolated_cells: int = 0

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.float64)
        if cells.ndim != 2:
            raise GridSpecError("density matrix must be two-dimensional")
        if np.any(cells < 0):
            raise GridSpecError("density matrix entries must be non-negative")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def u(self) -> int:
        return self.cells.shape[1]

    @property
    def v(self) -> int:
        return self.cells.shape[0]

    @property
    def total(self) -> float:
        return float(self.cells.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return np.array_equal(self.cells, other.cells)

    __hash__ = None


@dataclass(frozen=True, slots=True)
class KernelSpec:
    family: str
    bandwidth: int

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in KERNEL_FAMILIES:
            raise KernelSpecError(f"unknown kernel {self.family!r}; choose one of {', '.join(KERNEL_FAMILIES)}")
        object.__setattr__(self, "family", family)
        if int(self.bandwidth) != self.bandwidth or self.bandwidth < 1 or self.bandwidth % 2 == 0:
            raise KernelSpecError(f"bandwidth must be a positive odd integer, got {self.bandwidth!r}")

    @property
    def half_width(self) -> int:
        return (self.bandwidth - 1) // 2

    @classmethod
    def from_settings(cls) -> KernelSpec:
        return cls(settings.TRAJFORGE_KERNEL, settings.TRAJFORGE_BANDWIDTH)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Weights indexed ``[s + a_k, t + a_k]`` for offsets s (columns) and t (rows)."""
    spec: KernelSpec
    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.shape != (self.spec.bandwidth, self.spec.bandwidth):
            raise KernelSpecError(f"kernel weights must be {self.spec.bandwidth}x{self.spec.bandwidth}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def half_width(self) -> int:
        return self.spec.half_width

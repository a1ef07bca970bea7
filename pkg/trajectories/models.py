#
# trajectories/models.py
#
"""
Trajectory data model.

Trajectories are stored column-wise (one numpy array per field) rather than as
lists of point objects: the compressor and the rasterizer work on whole
columns, and a million Python objects would dominate the runtime. The
``TimestampedPoint`` view is still available per point for reporting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from core.exceptions import EmptyTrajectorySetError, InvariantViolation
from geo.models import CartesianPoint, GeoPoint


def _frozen(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, slots=True)
class TimestampedPoint:
    t: float
    pos: CartesianPoint
    raw_geo: GeoPoint


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    One vessel track: timestamps (s), projected x/y (m) and the geographic
    lon/lat (rad) kept for reporting. Timestamps strictly ascend.
    """
    mmsi: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lon: np.ndarray
    lat: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "y", "lon", "lat"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.t)
        if n < 1:
            raise InvariantViolation("a trajectory holds at least one point")
        if any(len(getattr(self, name)) != n for name in ("x", "y", "lon", "lat")):
            raise InvariantViolation("trajectory columns differ in length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise InvariantViolation(f"timestamps of MMSI {self.mmsi} are not strictly ascending")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise InvariantViolation(f"non-finite values in MMSI {self.mmsi}")

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.mmsi == other.mmsi and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("t", "x", "y", "lon", "lat")
        )

    __hash__ = None

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack((self.x, self.y))

    @property
    def points(self) -> list[TimestampedPoint]:
        return [self.point(i) for i in range(len(self))]

    def point(self, i: int) -> TimestampedPoint:
        return TimestampedPoint(
            t=float(self.t[i]),
            pos=CartesianPoint(float(self.x[i]), float(self.y[i])),
            raw_geo=GeoPoint(float(self.lon[i]), float(self.lat[i])),
        )

    def take(self, indices: Sequence[int] | np.ndarray) -> Trajectory:
        """Subsequence at the given (ascending) point indices."""
        idx = np.asarray(indices, dtype=np.int64)
        return Trajectory(self.mmsi, self.t[idx], self.x[idx], self.y[idx], self.lon[idx], self.lat[idx])


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """Immutable collection of trajectories; bounds are computed from the points."""
    trajectories: tuple[Trajectory, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def __getitem__(self, k: int) -> Trajectory:
        return self.trajectories[k]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectorySet):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))

    __hash__ = None

    @property
    def total_points(self) -> int:
        return sum(len(t) for t in self.trajectories)

    @cached_property
    def bounds(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) over every point of every trajectory."""
        if self.total_points == 0:
            raise EmptyTrajectorySetError("bounds of an empty trajectory set are undefined")
        return (
            float(min(t.x.min() for t in self.trajectories)),
            float(max(t.x.max() for t in self.trajectories)),
            float(min(t.y.min() for t in self.trajectories)),
            float(max(t.y.max() for t in self.trajectories)),
        )


@dataclass(frozen=True, eq=False)
class FlatTrajectoryStore:
    """
    Every trajectory merged back-to-back into one set of contiguous columns.

    ``t_len[k]`` is the length of trajectory k and ``offsets`` is its exclusive
    prefix sum, so trajectory k occupies ``[offsets[k], offsets[k] + t_len[k])``.
    """
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    t_len: np.ndarray
    offsets: np.ndarray
    mmsi_index: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "y", "lon", "lat"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("t_len", "offsets", "mmsi_index"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.validate()

    def validate(self) -> None:
        n = len(self.t)
        if int(self.t_len.sum()) != n:
            raise InvariantViolation("sum(t_len) differs from the number of stored points")
        if len(self.offsets) != len(self.t_len) or len(self.mmsi_index) != len(self.t_len):
            raise InvariantViolation("t_len, offsets and mmsi_index differ in length")
        if len(self.t_len):
            if self.offsets[0] != 0 or np.any(self.t_len < 1):
                raise InvariantViolation("offsets must start at 0 and every trajectory hold a point")
            if np.any(np.diff(self.offsets) != self.t_len[:-1]):
                raise InvariantViolation("offsets are not the exclusive prefix sums of t_len")

    def __len__(self) -> int:
        return len(self.t_len)

    @property
    def total_points(self) -> int:
        return len(self.t)

    @property
    def max_len(self) -> int:
        return int(self.t_len.max()) if len(self.t_len) else 0

    def slice_of(self, k: int) -> slice:
        start = int(self.offsets[k])
        return slice(start, start + int(self.t_len[k]))

    def trajectory_labels(self) -> np.ndarray:
        """Per-point trajectory label: k for every point of trajectory k."""
        return np.repeat(np.arange(len(self.t_len), dtype=np.int64), self.t_len)

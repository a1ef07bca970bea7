#
# primitives/models.py
#
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from django.conf import settings


@dataclass(frozen=True, slots=True)
class Block:
    """A block of B = width x height elements, laid out as `height` rows of `width`."""
    width: int = 32
    height: int = 32

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("block width and height must be at least 1")

    @property
    def capacity(self) -> int:
        return self.width * self.height

    @classmethod
    def from_settings(cls) -> Block:
        return cls(settings.TRAJFORGE_BLOCK_WIDTH, settings.TRAJFORGE_BLOCK_HEIGHT)


@dataclass(frozen=True, eq=False)
class SegmentedMaxResult:
    """Per-position running maximum inside each segment, and where it was attained."""
    d_max: np.ndarray
    i_max: np.ndarray

    def __len__(self) -> int:
        return len(self.d_max)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegmentedMaxResult):
            return NotImplemented
        return np.array_equal(self.d_max, other.d_max) and np.array_equal(self.i_max, other.i_max)

    __hash__ = None

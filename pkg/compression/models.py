#
# compression/models.py
#
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from primitives.models import SegmentedMaxResult


@dataclass(frozen=True, slots=True)
class CompressionThreshold:
    """Distance threshold epsilon in projected meters."""
    epsilon: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon!r}")


@dataclass
class CompressionState:
    """
    Label sets driving one round of the iterative compressor over a batch of
    merged trajectories. Positions are batch-local and 0-based; labels are
    1-based like the segment numbering they stand for.

    Per point: ``lp`` (segment label), ``d`` (VED), ``traj_label`` (which
    trajectory of the batch). Per segment, valid for the first ``n_kept``
    slots: ``lc`` (a feature point was found), ``is_idx`` (1-based start of the
    segment split off, 0 when none), ``lacc`` (exclusive scan of lc).
    ``kept`` is the retained set T'; ``staging`` is T* while it is assembled.
    All arrays are views into buffers allocated once by the caller.
    """
    x: np.ndarray
    y: np.ndarray
    is_tail: np.ndarray
    traj_label: np.ndarray
    lp: np.ndarray
    d: np.ndarray
    lc: np.ndarray
    is_idx: np.ndarray
    lacc: np.ndarray
    kept_buf: np.ndarray
    staging_buf: np.ndarray
    n_kept: int
    n_staged: int = 0
    scan: SegmentedMaxResult | None = None
    rounds: int = 0
    traj_rounds: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_points(self) -> int:
        return len(self.lp)

    @property
    def kept(self) -> np.ndarray:
        return self.kept_buf[:self.n_kept]

    @property
    def staging(self) -> np.ndarray:
        return self.staging_buf[:self.n_staged]


@dataclass
class BatchCompressionReport:
    """Per-trajectory sizes and rounds, plus wall-clock timings in seconds."""
    backend: str
    epsilon: float
    workers: int
    n_original: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    n_compressed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    total_seconds: float = 0.0
    staging_seconds: float = 0.0
    compute_seconds: float = 0.0

    @property
    def total_original(self) -> int:
        return int(self.n_original.sum())

    @property
    def total_compressed(self) -> int:
        return int(self.n_compressed.sum())

    @property
    def compression_ratio(self) -> float:
        if self.total_original == 0:
            return 0.0
        return 1.0 - self.total_compressed / self.total_original

    def as_dict(self) -> dict:
        return {
            "backend": self.backend,
            "epsilon": self.epsilon,
            "workers": self.workers,
            "trajectories": len(self.n_original),
            "points_original": self.total_original,
            "points_compressed": self.total_compressed,
            "cr": self.compression_ratio,
            "max_iterations": int(self.iterations.max()) if len(self.iterations) else 0,
            "total_seconds": self.total_seconds,
            "staging_seconds": self.staging_seconds,
            "compute_seconds": self.compute_seconds,
        }

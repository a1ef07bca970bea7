#
# metrics/models.py
#
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, slots=True)
class DtwResult:
    """
    sqrt of the minimal accumulated squared distance, and the length of the
    optimal warping path. ``path_length`` is None when the rolling two-row
    mode was used and no path was kept.
    """
    distance: float
    path_length: int | None = None

    @property
    def path_available(self) -> bool:
        return self.path_length is not None


@dataclass
class MetricReport:
    """One sweep row: CR, RLL and DTW mean/std, fractions not percents."""
    epsilon: float
    n_trajectories: int
    n_original: int
    n_compressed: int
    cr: float
    rll: float
    dtw_mean: float
    dtw_std: float
    timings: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        row = {
            "epsilon": self.epsilon,
            "trajectories": self.n_trajectories,
            "points_original": self.n_original,
            "points_compressed": self.n_compressed,
            "cr": self.cr,
            "rll": self.rll,
            "dtw_mean": self.dtw_mean,
            "dtw_std": self.dtw_std,
        }
        row.update(self.timings)
        return row

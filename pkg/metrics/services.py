#
# metrics/services.py
#
"""
Quality and speed measures for a compression run: compression ratio, rate of
length loss, DTW distance (mean and population standard deviation over all
trajectory pairs) and speedup ratio.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from django.template.loader import render_to_string

from core.exceptions import MetricInputError
from core.workers import WorkerPool, ensure_pool
from trajectories.models import Trajectory, TrajectorySet
from .models import DtwResult, MetricReport

logger = logging.getLogger(__name__)

# above this many cells DTW keeps two diagonals only and reports no path
FULL_MATRIX_LIMIT = 10 ** 8


def compression_ratio(n_o: int, n_c: int) -> float:
    if n_o <= 0:
        raise MetricInputError("compression ratio of an empty input is undefined")
    if not 1 <= n_c <= n_o:
        raise MetricInputError(f"compressed size {n_c} must lie in [1, {n_o}]")
    return 1.0 - n_c / n_o


def polyline_length(traj: Trajectory) -> float:
    return float(np.hypot(np.diff(traj.x), np.diff(traj.y)).sum())


def _check_pairs(originals: TrajectorySet, compressed: TrajectorySet) -> None:
    if len(originals) != len(compressed):
        raise MetricInputError(f"{len(originals)} original against {len(compressed)} compressed trajectories")
    for k, (a, b) in enumerate(zip(originals, compressed)):
        if a.mmsi != b.mmsi:
            raise MetricInputError(f"trajectory {k}: MMSI {a.mmsi} paired with {b.mmsi}")


def align_to(originals: TrajectorySet, compressed: TrajectorySet) -> TrajectorySet:
    """
    Re-cut compressed tracks along the time spans of the originals. Dropping
    points can open time gaps, so a compressed file read back may split or
    merge tracks differently from its source.
    """
    by_mmsi: dict[int, list[Trajectory]] = {}
    for traj in compressed:
        by_mmsi.setdefault(traj.mmsi, []).append(traj)
    pieces = {mmsi: merged[0] if len(merged) == 1 else _concat(merged) for mmsi, merged in by_mmsi.items()}

    aligned, used = [], 0
    for k, ref in enumerate(originals):
        source = pieces.get(ref.mmsi)
        if source is None:
            raise MetricInputError(f"trajectory {k}: MMSI {ref.mmsi} missing from the compressed data")
        lo = int(np.searchsorted(source.t, ref.t[0], side="left"))
        hi = int(np.searchsorted(source.t, ref.t[-1], side="right"))
        if hi <= lo:
            raise MetricInputError(f"trajectory {k}: no compressed points for MMSI {ref.mmsi}")
        aligned.append(source.take(np.arange(lo, hi)))
        used += hi - lo
    if used != compressed.total_points:
        raise MetricInputError(f"{compressed.total_points - used} compressed point(s) match no original trajectory")
    return TrajectorySet(tuple(aligned))


def _concat(parts: list[Trajectory]) -> Trajectory:
    return Trajectory(
        parts[0].mmsi,
        *(np.concatenate([getattr(p, name) for p in parts]) for name in ("t", "x", "y", "lon", "lat")),
    )


def rate_of_length_loss(originals: TrajectorySet, compressed: TrajectorySet) -> float:
    _check_pairs(originals, compressed)
    total = sum(polyline_length(t) for t in originals)
    if total <= 0:
        raise MetricInputError("total polyline length is zero")
    kept = sum(polyline_length(t) for t in compressed)
    return (total - kept) / total


def _diagonals(a: np.ndarray, b: np.ndarray, full: np.ndarray | None) -> float:
    """
    Fill the accumulated cost matrix one anti-diagonal at a time. Only the two
    previous diagonals are needed; ``full`` (when given) receives every cell.
    """
    n, m = len(a), len(b)
    prev2 = np.full(n + 1, np.inf)
    prev2[0] = 0.0
    prev1 = np.full(n + 1, np.inf)
    for k in range(2, n + m + 1):
        i = np.arange(max(1, k - m), min(n, k - 1) + 1)
        j = k - i
        diff = a[i - 1] - b[j - 1]
        cost = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1]
        cur = np.full(n + 1, np.inf)
        cur[i] = cost + np.minimum(np.minimum(prev1[i - 1], prev1[i]), prev2[i - 1])
        if full is not None:
            full[i, j] = cur[i]
        prev2, prev1 = prev1, cur
    return float(prev1[n])


def _path_length(acc: np.ndarray) -> int:
    """Back-track from (n, m) to (1, 1), preferring the diagonal step on ties."""
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    steps = 1
    while (i, j) != (1, 1):
        options = ((acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j), (acc[i, j - 1], i, j - 1))
        _, i, j = min(options, key=lambda o: o[0])
        steps += 1
    return steps


def dtw_distance(t1: Trajectory, t2: Trajectory, full_matrix_limit: int = FULL_MATRIX_LIMIT) -> DtwResult:
    """DTW over projected positions with squared Euclidean point cost."""
    if len(t1) == 0 or len(t2) == 0:
        raise MetricInputError("DTW needs two non-empty trajectories")
    a, b = t1.xy, t2.xy
    n, m = len(a), len(b)
    if n * m > full_matrix_limit:
        logger.debug("DTW %dx%d above the full-matrix limit; path not kept", n, m)
        return DtwResult(distance=float(np.sqrt(_diagonals(a, b, None))))
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    total = _diagonals(a, b, acc)
    return DtwResult(distance=float(np.sqrt(total)), path_length=_path_length(acc))


def dtw_stats(
    pairs: Sequence[tuple[Trajectory, Trajectory]],
    workers: WorkerPool | int | None = None,
) -> tuple[float, float]:
    """Mean and population standard deviation of the per-pair DTW distances."""
    if len(pairs) == 0:
        raise MetricInputError("no trajectory pairs to compare")
    pool, owned = ensure_pool(workers)
    try:
        distances = np.array(pool.map(lambda pair: dtw_distance(*pair).distance, pairs))
    finally:
        if owned:
            pool.close()
    return float(distances.mean()), float(distances.std())


def speedup_ratio(serial_time: float, parallel_time: float) -> float:
    if not (serial_time > 0 and parallel_time > 0):
        raise MetricInputError("both timings must be positive")
    return serial_time / parallel_time


def evaluate(
    originals: TrajectorySet,
    compressed: TrajectorySet,
    *,
    epsilon: float = 0.0,
    workers: WorkerPool | int | None = None,
    timings: dict[str, float] | None = None,
) -> MetricReport:
    _check_pairs(originals, compressed)
    n_o, n_c = originals.total_points, compressed.total_points
    mu, delta = dtw_stats(list(zip(originals, compressed)), workers=workers)
    report = MetricReport(
        epsilon=epsilon,
        n_trajectories=len(originals),
        n_original=n_o,
        n_compressed=n_c,
        cr=compression_ratio(n_o, n_c),
        rll=rate_of_length_loss(originals, compressed),
        dtw_mean=mu,
        dtw_std=delta,
        timings=dict(timings or {}),
    )
    logger.info("eps=%g: CR=%.5f RLL=%.5f DTW=%.4f +- %.4f", epsilon, report.cr, report.rll, mu, delta)
    return report


def render_key_values(row: dict) -> str:
    """Flat key=value block, one pair per line."""
    return render_to_string("report.txt", {"row": row})


def render_report(report: MetricReport) -> str:
    return render_key_values(report.as_dict())


def render_table(reports: Sequence[MetricReport]) -> str:
    """Fixed-width table: one row per epsilon, percents and mu +- delta."""
    return render_to_string("metrics/table.txt", {"reports": reports})

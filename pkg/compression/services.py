#
# compression/services.py
#
"""
Douglas-Peucker compression: the VED, the recursive reference compressor, and
the entry point that runs either backend over a whole trajectory set.
"""
from __future__ import annotations

import logging
import time

import numpy as np

from core.workers import WorkerPool, ensure_pool
from geo.models import CartesianPoint
from primitives.models import Block
from trajectories.models import Trajectory, TrajectorySet
from trajectories.services import flatten, subset
from .models import BatchCompressionReport, CompressionThreshold

logger = logging.getLogger(__name__)

BACKENDS = ("serial", "parallel")


def vertical_distances(px, py, sx, sy, ex, ey) -> np.ndarray:
    """
    VED of points p to the chord s -> e, elementwise with broadcasting:
    |cross(s->p, s->e)| / |s->e|, or |p - s| where s and e coincide.

    Both compressors call this one function so their distances agree bit for bit.
    """
    px, py, sx, sy, ex, ey = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (px, py, sx, sy, ex, ey)))
    dx = ex - sx
    dy = ey - sy
    rx = px - sx
    ry = py - sy
    base = np.sqrt(dx * dx + dy * dy)
    cross = np.abs(rx * dy - ry * dx)
    out = np.sqrt(rx * rx + ry * ry)
    np.divide(cross, base, out=out, where=base > 0)
    return out


def ved(p: CartesianPoint, s: CartesianPoint, e: CartesianPoint) -> float:
    return float(vertical_distances(p.x, p.y, s.x, s.y, e.x, e.y))


def _epsilon(eps: CompressionThreshold | float) -> float:
    if isinstance(eps, CompressionThreshold):
        return eps.epsilon
    return CompressionThreshold(float(eps)).epsilon


def dp_retained_indices(x: np.ndarray, y: np.ndarray, eps: CompressionThreshold | float) -> np.ndarray:
    """
    Indices kept by Douglas-Peucker. A work stack replaces recursion so long
    trajectories never hit the interpreter's recursion limit.

    A point is kept only when its VED is strictly larger than epsilon; ties
    for the maximum go to the earliest index.
    """
    return _split(x, y, _epsilon(eps))[0]


def _split(x: np.ndarray, y: np.ndarray, epsilon: float) -> tuple[np.ndarray, int]:
    """Retained indices and the depth of the deepest split."""
    n = len(x)
    if n <= 2:
        return np.arange(n, dtype=np.int64), 0
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    depth = 0
    stack = [(0, n - 1, 1)]
    while stack:
        s, e, level = stack.pop()
        if e - s < 2:
            continue
        d = vertical_distances(x[s + 1:e], y[s + 1:e], x[s], y[s], x[e], y[e])
        m = int(np.argmax(d))
        if d[m] > epsilon:
            k = s + 1 + m
            keep[k] = True
            depth = max(depth, level)
            stack.append((k, e, level + 1))
            stack.append((s, k, level + 1))
    return np.flatnonzero(keep), depth


def dp_compress(traj: Trajectory, eps: CompressionThreshold | float) -> Trajectory:
    return traj.take(dp_retained_indices(traj.x, traj.y, eps))


def _serial_batch(trajectories: TrajectorySet, epsilon: float, pool: WorkerPool) -> tuple[list[np.ndarray], np.ndarray]:
    # one task per trajectory
    results = pool.map(lambda traj: _split(traj.x, traj.y, epsilon), trajectories)
    return [r[0] for r in results], np.array([r[1] for r in results], dtype=np.int64)


def compress_set(
    trajectories: TrajectorySet,
    eps: CompressionThreshold | float,
    *,
    backend: str = "parallel",
    workers: WorkerPool | int | None = None,
    block: Block | None = None,
) -> tuple[TrajectorySet, BatchCompressionReport]:
    """Compress every trajectory with the chosen backend; both give identical output."""
    from .parallel import parallel_retained_indices

    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose one of {', '.join(BACKENDS)}")
    epsilon = _epsilon(eps)
    pool, owned = ensure_pool(workers)
    try:
        started = time.perf_counter()
        if backend == "serial":
            retained, depths = _serial_batch(trajectories, epsilon, pool)
            report = BatchCompressionReport(backend=backend, epsilon=epsilon, workers=pool.workers)
            report.compute_seconds = time.perf_counter() - started
            report.iterations = depths
        else:
            store = flatten(trajectories)
            retained, report = parallel_retained_indices(store, epsilon, workers=pool, block=block)
            report.staging_seconds += time.perf_counter() - started - report.total_seconds
        compressed = subset(trajectories, retained)
        report.n_original = np.array([len(t) for t in trajectories], dtype=np.int64)
        report.n_compressed = np.array([len(r) for r in retained], dtype=np.int64)
        report.total_seconds = time.perf_counter() - started
    finally:
        if owned:
            pool.close()
    logger.info(
        "%s backend: %d -> %d points over %d trajectories (eps=%g) in %.3fs",
        backend, report.total_original, report.total_compressed, len(trajectories), epsilon, report.total_seconds,
    )
    return compressed, report

#
# density/services.py
#
"""
Density map generation: grid projection of every point, optional gap
interpolation between consecutive points of one trajectory, and kernel
smoothing by 2-D convolution.
"""
from __future__ import annotations

import logging

import numpy as np
from scipy import ndimage

from core.exceptions import KernelSpecError
from core.workers import WorkerPool, ensure_pool
from geo.models import CartesianPoint
from trajectories.models import FlatTrajectoryStore
from .models import DensityMatrix, GridCell, GridSpec, KernelMatrix

logger = logging.getLogger(__name__)

DEFAULT_TILE = 128


# --- Projection and interpolation ---

def grid_project_arrays(x, y, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    1-based cells for every point and a mask of the points inside the grid
    bounds (inclusive). Cells of outside points are meaningless.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = (x >= grid.x_min) & (x <= grid.x_max) & (y >= grid.y_min) & (y <= grid.y_max)
    cx = np.ceil((x - grid.x_min) / (grid.x_max - grid.x_min) * (grid.u - 1)) + 1
    cy = np.ceil((y - grid.y_min) / (grid.y_max - grid.y_min) * (grid.v - 1)) + 1
    cx = np.clip(np.where(inside, cx, 1), 1, grid.u).astype(np.int64)
    cy = np.clip(np.where(inside, cy, 1), 1, grid.v).astype(np.int64)
    return cx, cy, inside


def grid_project(p: CartesianPoint, grid: GridSpec) -> GridCell | None:
    """Cell of one point, or None when it lies outside the grid."""
    cx, cy, inside = grid_project_arrays([p.x], [p.y], grid)
    if not inside[0]:
        return None
    return GridCell(int(cx[0]), int(cy[0]))


def _interior_cells(xa, ya, xb, yb) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rounded linear interpolants between every pair (a, b) of cells. Returns
    the cells and, for each one, the index of the pair it came from.
    """
    xa, ya, xb, yb = (np.asarray(c, dtype=np.int64) for c in (xa, ya, xb, yb))
    dx, dy = xb - xa, yb - ya
    c_max = np.maximum(np.abs(dx), np.abs(dy))
    count = np.maximum(c_max - 1, 0)
    total = int(count.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    pair = np.repeat(np.arange(len(xa)), count)
    # c runs 1..c_max-1 inside each pair
    first = np.repeat(np.cumsum(count) - count, count)
    c = np.arange(total) - first + 1
    frac = c / c_max[pair]
    # round half up; cells are positive
    x = np.floor(xa[pair] + frac * dx[pair] + 0.5).astype(np.int64)
    y = np.floor(ya[pair] + frac * dy[pair] + 0.5).astype(np.int64)
    return x, y, pair


def interpolate_cells(cell_a: GridCell, cell_b: GridCell) -> list[GridCell]:
    """Cells strictly between a and b; empty when they already touch."""
    x, y, _ = _interior_cells([cell_a.x], [cell_a.y], [cell_b.x], [cell_b.y])
    return [GridCell(int(i), int(j)) for i, j in zip(x, y)]


# --- Rasterization ---

def _raster_range(start: int, stop: int, store: FlatTrajectoryStore, labels: np.ndarray, grid: GridSpec, interpolate: bool):
    """Private count grid for points [start, stop) and the pairs that begin there."""
    n = store.total_points
    cx, cy, inside = grid_project_arrays(store.x[start:stop], store.y[start:stop], grid)
    size = grid.u * grid.v
    counts = np.bincount(((cy - 1) * grid.u + (cx - 1))[inside], minlength=size)
    skipped = int((~inside).sum())
    extra = 0
    if interpolate:
        # pair (i, i + 1) belongs to the range owning i
        stop_pair = min(stop, n - 1)
        if stop_pair > start:
            if stop_pair == stop:
                # the last pair reaches one point into the next range
                tx, ty, t_in = grid_project_arrays(store.x[stop:stop + 1], store.y[stop:stop + 1], grid)
                nx, ny, n_in = np.append(cx[1:], tx), np.append(cy[1:], ty), np.append(inside[1:], t_in)
                hx, hy, h_in = cx, cy, inside
            else:
                nx, ny, n_in = cx[1:], cy[1:], inside[1:]
                hx, hy, h_in = cx[:-1], cy[:-1], inside[:-1]
            same = labels[start:stop_pair] == labels[start + 1:stop_pair + 1]
            ok = same & h_in & n_in
            x, y, _ = _interior_cells(hx[ok], hy[ok], nx[ok], ny[ok])
            if len(x):
                counts += np.bincount((y - 1) * grid.u + (x - 1), minlength=size)
                extra = len(x)
    return counts, skipped, extra


def rasterize(
    store: FlatTrajectoryStore,
    grid: GridSpec,
    interpolate: bool = False,
    workers: WorkerPool | int | None = None,
) -> DensityMatrix:
    """
    Count points per cell. Each worker fills a private grid over its own
    point range; the partial grids are summed at the end, so the result does
    not depend on the worker count. Interpolation never crosses from one
    trajectory into the next.
    """
    pool, owned = ensure_pool(workers)
    labels = store.trajectory_labels()
    try:
        parts = pool.map_ranges(
            lambda s, e: _raster_range(s, e, store, labels, grid, interpolate),
            store.total_points,
        )
    finally:
        if owned:
            pool.close()
    counts = np.zeros(grid.u * grid.v, dtype=np.int64)
    skipped = extra = 0
    for part_counts, part_skipped, part_extra in parts:
        counts += part_counts
        skipped += part_skipped
        extra += part_extra
    if skipped:
        logger.warning("%d point(s) outside the grid were skipped", skipped)
    logger.info(
        "rasterized %d point(s) and %d interpolated cell(s) onto %dx%d",
        store.total_points - skipped, extra, grid.u, grid.v,
    )
    return DensityMatrix(
        cells=counts.reshape(grid.v, grid.u).astype(np.float64),
        skipped_points=skipped,
        interpolated_cells=extra,
    )


# --- Convolution ---

def _check_fits(m: DensityMatrix, k: KernelMatrix) -> None:
    if k.spec.bandwidth > min(m.u, m.v):
        raise KernelSpecError(f"a {k.spec.bandwidth}x{k.spec.bandwidth} kernel does not fit a {m.u}x{m.v} grid")


def _convolve_tile(padded: np.ndarray, weights: np.ndarray, a: int, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
    """
    out[y, x] = sum over (s, t) of f(s, t) * M[y - t, x - s] for one tile,
    M being ``padded`` shifted by a in both axes. The kernel loop order is
    fixed, so every cell sums its terms in the same order whatever the tiling.
    """
    out = np.zeros((r1 - r0, c1 - c0), dtype=np.float64)
    width = weights.shape[0]
    for si in range(width):
        s = si - a
        for ti in range(width):
            t = ti - a
            w = weights[si, ti]
            if w == 0.0:
                continue
            out += w * padded[r0 - t + a:r1 - t + a, c0 - s + a:c1 - s + a]
    return out


def convolve(
    m: DensityMatrix,
    k: KernelMatrix,
    workers: WorkerPool | int | None = None,
    tile: int = DEFAULT_TILE,
) -> DensityMatrix:
    """
    Smooth the matrix with zero padding. The output is cut into tiles and each
    worker writes only its own tiles.
    """
    _check_fits(m, k)
    a = k.half_width
    padded = np.pad(m.cells, a)
    out = np.empty_like(m.cells)
    tiles = [
        (r0, min(r0 + tile, m.v), c0, min(c0 + tile, m.u))
        for r0 in range(0, m.v, tile)
        for c0 in range(0, m.u, tile)
    ]

    def run(box):
        r0, r1, c0, c1 = box
        out[r0:r1, c0:c1] = _convolve_tile(padded, k.weights, a, r0, r1, c0, c1)

    pool, owned = ensure_pool(workers)
    try:
        pool.map(run, tiles)
    finally:
        if owned:
            pool.close()
    logger.debug("convolved %dx%d with %s/%d over %d tile(s)", m.u, m.v, k.spec.family, k.spec.bandwidth, len(tiles))
    return DensityMatrix(cells=out, skipped_points=m.skipped_points, interpolated_cells=m.interpolated_cells)


def convolve_serial(m: DensityMatrix, k: KernelMatrix) -> DensityMatrix:
    """Single-threaded direct evaluation, one output row at a time."""
    _check_fits(m, k)
    a = k.half_width
    cells = m.cells
    out = np.zeros_like(cells)
    for y in range(m.v):
        for ti in range(k.spec.bandwidth):
            src = y - (ti - a)
            if not 0 <= src < m.v:
                continue
            row = cells[src]
            for si in range(k.spec.bandwidth):
                s = si - a
                w = k.weights[si, ti]
                # out[y, x] += w * row[x - s] where 0 <= x - s < u
                lo, hi = max(0, s), min(m.u, m.u + s)
                out[y, lo:hi] += w * row[lo - s:hi - s]
    return DensityMatrix(cells=out, skipped_points=m.skipped_points, interpolated_cells=m.interpolated_cells)


def convolve_ndimage(m: DensityMatrix, k: KernelMatrix) -> DensityMatrix:
    """The same zero-padded smoothing through scipy; weights are indexed [s, t], hence the transpose."""
    _check_fits(m, k)
    out = ndimage.convolve(m.cells, k.weights.T, mode="constant", cval=0.0)
    return DensityMatrix(cells=out, skipped_points=m.skipped_points, interpolated_cells=m.interpolated_cells)


def density_map(
    store: FlatTrajectoryStore,
    grid: GridSpec,
    k: KernelMatrix,
    *,
    interpolate: bool = False,
    workers: WorkerPool | int | None = None,
) -> tuple[DensityMatrix, DensityMatrix]:
    """Raw counts and the smoothed map, sharing one pool."""
    pool, owned = ensure_pool(workers)
    try:
        counts = rasterize(store, grid, interpolate=interpolate, workers=pool)
        return counts, convolve(counts, k, workers=pool)
    finally:
        if owned:
            pool.close()

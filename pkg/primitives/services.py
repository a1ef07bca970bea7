#
# primitives/services.py
#
"""
Scan primitives used by the parallel compressor.

Each primitive has a serial reference and a block-parallel version whose
output is bit-identical to the reference for every block shape and worker
count. The parallel versions work block by block:

* exclusive sum-scan: per-block balanced-tree up-sweep/down-sweep, block
  totals collected in a temporary set, the temporary set scanned, and each
  block offset by the scanned total of the blocks before it;
* segmented max-scan: every block viewed as an H x W matrix, rows scanned in
  parallel, the row results scanned down the column, rows fixed up from the
  column, then the per-block results scanned recursively and propagated
  (scan-recursion-propagate).

Ties inside a segment always resolve to the earliest index.
"""
from __future__ import annotations

import logging

import numpy as np

from core.workers import WorkerPool, ensure_pool
from .models import Block, SegmentedMaxResult

logger = logging.getLogger(__name__)


# --- Exclusive sum-scan ---

def exclusive_scan_serial(values) -> np.ndarray:
    """out[0] = 0, out[i] = sum(values[:i]). 64-bit accumulator."""
    values = np.asarray(values, dtype=np.int64)
    out = np.zeros(len(values), dtype=np.int64)
    if len(values) > 1:
        np.cumsum(values[:-1], out=out[1:])
    return out


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _blelloch_rows(rows: np.ndarray) -> np.ndarray:
    """
    In-place exclusive scan of every row of a (k, P) array, P a power of two.
    Returns the row totals (the root of each reduce tree).
    """
    width = rows.shape[1]
    # reduce (up-sweep)
    stride = 2
    while stride <= width:
        rows[:, stride - 1::stride] += rows[:, stride // 2 - 1::stride]
        stride *= 2
    totals = rows[:, -1].copy()
    rows[:, -1] = 0
    # down-sweep
    stride = width
    while stride >= 2:
        left = rows[:, stride // 2 - 1::stride].copy()
        rows[:, stride // 2 - 1::stride] = rows[:, stride - 1::stride]
        rows[:, stride - 1::stride] += left
        stride //= 2
    return totals


def exclusive_scan_parallel(values, block: Block | None = None, workers: WorkerPool | int | None = None) -> np.ndarray:
    block = block or Block.from_settings()
    if block.capacity < 2:
        raise ValueError("exclusive scan needs a block capacity of at least 2")
    pool, owned = ensure_pool(workers)
    try:
        return _exclusive_scan_blocks(np.asarray(values, dtype=np.int64), block.capacity, pool)
    finally:
        if owned:
            pool.close()


def _exclusive_scan_blocks(values: np.ndarray, capacity: int, pool: WorkerPool) -> np.ndarray:
    n = len(values)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    n_blocks = -(-n // capacity)
    width = _next_pow2(capacity)
    flat = np.zeros(n_blocks * capacity, dtype=np.int64)
    flat[:n] = values
    data = np.zeros((n_blocks, width), dtype=np.int64)
    data[:, :capacity] = flat.reshape(n_blocks, capacity)

    # phase 1: every block scans itself
    totals = np.concatenate(pool.map_ranges(lambda s, e: _blelloch_rows(data[s:e]), n_blocks))

    if n_blocks > 1:
        # phase 2: scan the temporary set of block totals (recursing when it spans blocks)
        block_offsets = _exclusive_scan_blocks(totals, capacity, pool)

        # phase 3: propagate offsets to every block but the first
        def propagate(s: int, e: int) -> None:
            data[s:e] += block_offsets[s:e, None]

        pool.map_ranges(propagate, n_blocks)
    return data[:, :capacity].reshape(-1)[:n].copy()


# --- Segmented max-scan with index ---

def _check_segments(d: np.ndarray, lp: np.ndarray) -> None:
    if len(d) != len(lp):
        raise ValueError(f"length mismatch: {len(d)} distances, {len(lp)} labels")
    if len(lp) > 1 and np.any(np.diff(lp) < 0):
        raise ValueError("segment labels must be non-decreasing")


def segmented_max_scan_serial(d, lp) -> SegmentedMaxResult:
    """Prefix maximum restarted at every label change, earliest index on ties."""
    d = np.asarray(d, dtype=np.float64)
    lp = np.asarray(lp, dtype=np.int64)
    _check_segments(d, lp)
    n = len(d)
    d_max = np.empty(n, dtype=np.float64)
    i_max = np.empty(n, dtype=np.int64)
    if n == 0:
        return SegmentedMaxResult(d_max=d_max, i_max=i_max)
    starts = np.concatenate(([0], np.flatnonzero(np.diff(lp)) + 1, [n]))
    for s, e in zip(starts[:-1], starts[1:]):
        seg = d[s:e]
        running = np.maximum.accumulate(seg)
        record = np.ones(e - s, dtype=bool)
        record[1:] = seg[1:] > running[:-1]
        d_max[s:e] = running
        i_max[s:e] = np.maximum.accumulate(np.where(record, np.arange(s, e), s))
    return SegmentedMaxResult(d_max=d_max, i_max=i_max)


def _take_previous(val, lab, prev_val, prev_lab):
    """The earlier element wins when it shares the label and is not beaten strictly."""
    return (lab == prev_lab) & ~(val > prev_val)


def _scan_rows(val, lab, idx) -> None:
    """Step 1: every row of every block scanned left to right, in place."""
    for i in range(1, val.shape[-1]):
        keep = _take_previous(val[..., i], lab[..., i], val[..., i - 1], lab[..., i - 1])
        val[..., i] = np.where(keep, val[..., i - 1], val[..., i])
        idx[..., i] = np.where(keep, idx[..., i - 1], idx[..., i])


def _scan_column(col_val, col_lab, col_idx) -> None:
    """Step 2: the row results of each block scanned top to bottom, in place."""
    for r in range(1, col_val.shape[-1]):
        keep = _take_previous(col_val[:, r], col_lab[:, r], col_val[:, r - 1], col_lab[:, r - 1])
        col_val[:, r] = np.where(keep, col_val[:, r - 1], col_val[:, r])
        col_idx[:, r] = np.where(keep, col_idx[:, r - 1], col_idx[:, r])


def _fix_rows(val, lab, idx, col_val, col_lab, col_idx) -> None:
    """
    Step 3: row r > 0 inherits the column result of row r - 1 over its leading
    run of the same label. Row 0 has no predecessor inside the block.
    """
    carry_val = col_val[:, :-1]
    carry_lab = col_lab[:, :-1]
    carry_idx = col_idx[:, :-1]
    rows_val, rows_lab, rows_idx = val[:, 1:, :], lab[:, 1:, :], idx[:, 1:, :]
    active = np.ones(carry_val.shape, dtype=bool)
    for i in range(val.shape[-1]):
        active &= _take_previous(rows_val[..., i], rows_lab[..., i], carry_val, carry_lab)
        if not active.any():
            break
        rows_val[..., i] = np.where(active, carry_val, rows_val[..., i])
        rows_idx[..., i] = np.where(active, carry_idx, rows_idx[..., i])


def segmented_max_scan_parallel(d, lp, block: Block | None = None, workers: WorkerPool | int | None = None) -> SegmentedMaxResult:
    block = block or Block.from_settings()
    if block.capacity < 2:
        raise ValueError("segmented scan needs a block capacity of at least 2")
    d = np.asarray(d, dtype=np.float64)
    lp = np.asarray(lp, dtype=np.int64)
    _check_segments(d, lp)
    pool, owned = ensure_pool(workers)
    try:
        d_max, i_max = _segmented_scan_blocks(d, lp, np.arange(len(d), dtype=np.int64), block, pool)
    finally:
        if owned:
            pool.close()
    return SegmentedMaxResult(d_max=d_max, i_max=i_max)


def _segmented_scan_blocks(d, lp, ids, block: Block, pool: WorkerPool) -> tuple[np.ndarray, np.ndarray]:
    n = len(d)
    if n == 0:
        return np.zeros(0, dtype=np.float64), np.zeros(0, dtype=np.int64)
    cap, h, w = block.capacity, block.height, block.width
    n_blocks = -(-n // cap)
    padded = n_blocks * cap

    # padding gets a label of its own so it never joins a real segment
    val = np.full(padded, -np.inf, dtype=np.float64)
    lab = np.full(padded, lp[-1] + 1, dtype=np.int64)
    idx = np.full(padded, -1, dtype=np.int64)
    val[:n], lab[:n], idx[:n] = d, lp, ids
    val = val.reshape(n_blocks, h, w)
    lab = lab.reshape(n_blocks, h, w)
    idx = idx.reshape(n_blocks, h, w)

    col_val = np.empty((n_blocks, h), dtype=np.float64)
    col_lab = np.empty((n_blocks, h), dtype=np.int64)
    col_idx = np.empty((n_blocks, h), dtype=np.int64)

    def rows_phase(s: int, e: int) -> None:
        _scan_rows(val[s:e], lab[s:e], idx[s:e])
        col_val[s:e] = val[s:e, :, -1]
        col_lab[s:e] = lab[s:e, :, -1]
        col_idx[s:e] = idx[s:e, :, -1]

    def column_phase(s: int, e: int) -> None:
        _scan_column(col_val[s:e], col_lab[s:e], col_idx[s:e])

    def fix_phase(s: int, e: int) -> None:
        _fix_rows(val[s:e], lab[s:e], idx[s:e], col_val[s:e], col_lab[s:e], col_idx[s:e])

    pool.map_ranges(rows_phase, n_blocks)
    pool.map_ranges(column_phase, n_blocks)
    if h > 1:
        pool.map_ranges(fix_phase, n_blocks)

    flat_val = val.reshape(n_blocks, cap)
    flat_lab = lab.reshape(n_blocks, cap)
    flat_idx = idx.reshape(n_blocks, cap)

    if n_blocks > 1:
        # recursion: scan the last element of every block
        tail_val, tail_idx = _segmented_scan_blocks(
            flat_val[:, -1].copy(), flat_lab[:, -1].copy(), flat_idx[:, -1].copy(), block, pool
        )
        tail_lab = flat_lab[:, -1]

        # propagate: block b inherits the scanned tail of block b - 1.
        # Running maxima within a label never decrease, so the positions that
        # inherit form a prefix of the block.
        def propagate(s: int, e: int) -> None:
            s = max(s, 1)
            if s >= e:
                return
            cv, cl, ci = tail_val[s - 1:e - 1, None], tail_lab[s - 1:e - 1, None], tail_idx[s - 1:e - 1, None]
            inherit = _take_previous(flat_val[s:e], flat_lab[s:e], cv, cl)
            flat_val[s:e] = np.where(inherit, cv, flat_val[s:e])
            flat_idx[s:e] = np.where(inherit, ci, flat_idx[s:e])

        pool.map_ranges(propagate, n_blocks)

    logger.debug("segmented max-scan: %d elements over %d block(s)", n, n_blocks)
    return flat_val.reshape(-1)[:n].copy(), flat_idx.reshape(-1)[:n].copy()

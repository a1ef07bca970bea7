#
# compression/parallel.py
#
"""
Iterative, label-driven Douglas-Peucker.

Instead of recursing, every round handles all current curve segments of a
batch of merged trajectories at once:

    a. VED of every point against the chord of its segment (looked up via lp)
    b. segmented max-scan of D over lp            -> Dmax, Imax
    c. mark segments whose maximum exceeds eps    -> Lc, Is
    d. exclusive scan of Lc                       -> Lacc; stop when nothing was marked
    e. merge the kept set and the new feature points into the staging set
    f. relabel lp so each feature point opens a new segment
    g. swap staging into kept and reset the per-segment sets

Only one feature point per segment and round is taken, so the retained set is
exactly the one the recursive compressor produces.
"""
from __future__ import annotations

import logging
import time

import numpy as np
from django.conf import settings

from core.exceptions import InvariantViolation
from core.workers import WorkerPool, ensure_pool
from primitives.models import Block
from primitives.services import exclusive_scan_parallel, segmented_max_scan_parallel
from trajectories.models import FlatTrajectoryStore, Trajectory
from .models import BatchCompressionReport, CompressionState, CompressionThreshold
from .services import _epsilon, vertical_distances

logger = logging.getLogger(__name__)


class Workspace:
    """Auxiliary sets for one compression run, allocated once and reused per batch."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.x = np.empty(capacity, dtype=np.float64)
        self.y = np.empty(capacity, dtype=np.float64)
        self.is_tail = np.zeros(capacity, dtype=bool)
        self.traj_label = np.empty(capacity, dtype=np.int64)
        self.lp = np.empty(capacity, dtype=np.int64)
        self.d = np.zeros(capacity, dtype=np.float64)
        self.lc = np.zeros(capacity, dtype=np.int64)
        self.is_idx = np.zeros(capacity, dtype=np.int64)
        self.lacc = np.zeros(capacity, dtype=np.int64)
        self.kept = np.empty(capacity, dtype=np.int64)
        self.staging = np.empty(capacity, dtype=np.int64)

    def load(self, x: np.ndarray, y: np.ndarray) -> int:
        n = len(x)
        if n > self.capacity:
            raise InvariantViolation(f"batch of {n} points exceeds workspace capacity {self.capacity}")
        self.x[:n] = x
        self.y[:n] = y
        return n


def _start_batch(ws: Workspace, n: int, t_len: np.ndarray) -> CompressionState:
    """Kept = first and last point of every trajectory; lp = inclusive scan of that mask."""
    offsets = np.concatenate(([0], np.cumsum(t_len)[:-1])).astype(np.int64)
    tails = offsets + t_len - 1

    is_tail = ws.is_tail[:n]
    is_tail[:] = False
    is_tail[tails] = True
    traj_label = ws.traj_label[:n]
    traj_label[:] = np.repeat(np.arange(len(t_len), dtype=np.int64), t_len)

    mask = np.zeros(n, dtype=bool)
    mask[offsets] = True
    mask[tails] = True
    kept = np.flatnonzero(mask)
    ws.kept[:len(kept)] = kept
    lp = ws.lp[:n]
    np.cumsum(mask, out=lp)

    for buf in (ws.d, ws.lc, ws.is_idx, ws.lacc):
        buf[:n] = 0
    return CompressionState(
        x=ws.x[:n], y=ws.y[:n], is_tail=is_tail, traj_label=traj_label,
        lp=lp, d=ws.d[:n], lc=ws.lc[:n], is_idx=ws.is_idx[:n], lacc=ws.lacc[:n],
        kept_buf=ws.kept, staging_buf=ws.staging, n_kept=len(kept),
        traj_rounds=np.zeros(len(t_len), dtype=np.int64),
    )


def init_state(traj_slice: Trajectory | FlatTrajectoryStore, workspace: Workspace | None = None) -> CompressionState | None:
    """
    Initial state for one trajectory or a merged batch. Returns None when no
    trajectory has two points: those pass through unchanged.
    """
    if isinstance(traj_slice, Trajectory):
        t_len = np.array([len(traj_slice)], dtype=np.int64)
    else:
        t_len = np.asarray(traj_slice.t_len, dtype=np.int64)
    if len(t_len) == 0 or t_len.max() < 2:
        return None
    ws = workspace or Workspace(int(t_len.sum()))
    n = ws.load(traj_slice.x, traj_slice.y)
    return _start_batch(ws, n, t_len)


def _segment_ends(state: CompressionState) -> np.ndarray:
    """Chord end of every segment: the next kept point, or itself for a trajectory's last point."""
    kept = state.kept
    nxt = np.empty_like(kept)
    nxt[:-1] = kept[1:]
    nxt[-1] = kept[-1]
    return np.where(state.is_tail[kept], kept, nxt)


def _check_labels(state: CompressionState) -> None:
    lp = state.lp
    if len(lp) > 1 and np.any(lp[1:] < lp[:-1]):
        raise InvariantViolation("segment labels are no longer non-decreasing")
    if not np.array_equal(lp[state.staging], np.arange(1, state.n_staged + 1)):
        raise InvariantViolation("a retained point does not open its own segment")


def iterate(
    state: CompressionState,
    eps: CompressionThreshold | float,
    *,
    workers: WorkerPool | int | None = None,
    block: Block | None = None,
) -> tuple[CompressionState, bool]:
    """Run one full round. Returns (state, done); done means no segment exceeded eps."""
    epsilon = _epsilon(eps)
    block = block or Block.from_settings()
    pool, owned = ensure_pool(workers)
    try:
        return _round(state, epsilon, pool, block)
    finally:
        if owned:
            pool.close()


def _round(state: CompressionState, epsilon: float, pool: WorkerPool, block: Block) -> tuple[CompressionState, bool]:
    n, m = state.n_points, state.n_kept
    kept, lp, d = state.kept, state.lp, state.d
    x, y = state.x, state.y

    # a. VED against each point's own chord
    seg_start = kept
    seg_end = _segment_ends(state)

    def ved_range(s: int, e: int) -> None:
        seg = lp[s:e] - 1
        a, b = seg_start[seg], seg_end[seg]
        d[s:e] = vertical_distances(x[s:e], y[s:e], x[a], y[a], x[b], y[b])

    pool.map_ranges(ved_range, n)

    # b. running maximum per segment
    state.scan = segmented_max_scan_parallel(d, lp, block, pool)

    # c. segments whose maximum exceeds eps yield a feature point
    seg_last = np.empty(m, dtype=np.int64)
    seg_last[:-1] = kept[1:] - 1
    seg_last[-1] = n - 1
    lc, is_idx, lacc = state.lc[:m], state.is_idx[:m], state.lacc[:m]
    lc[:] = state.scan.d_max[seg_last] > epsilon
    is_idx[:] = np.where(lc == 1, state.scan.i_max[seg_last] + 1, 0)

    # d. count them
    lacc[:] = exclusive_scan_parallel(lc, block, pool)
    added = int(lacc[-1] + lc[-1])
    if added == 0:
        return state, True

    # e. copy kept into staging at its shifted slots and insert the new points
    state.n_staged = m + added
    staging = state.staging_buf

    def merge(s: int, e: int) -> None:
        k = np.arange(s, e)
        slot = k + lacc[s:e]
        staging[slot] = kept[s:e]
        split = lc[s:e] == 1
        staging[slot[split] + 1] = is_idx[s:e][split] - 1

    pool.map_ranges(merge, m)
    if np.any(np.diff(state.staging) <= 0):
        raise InvariantViolation("staging set is not strictly increasing after merge")

    # f. relabel: shift by the points found before the segment, +1 past the split
    def relabel(s: int, e: int) -> None:
        seg = lp[s:e] - 1
        past_split = (lc[seg] == 1) & (np.arange(s + 1, e + 1) >= is_idx[seg])
        lp[s:e] += lacc[seg] + past_split

    pool.map_ranges(relabel, n)
    _check_labels(state)

    split_traj = np.unique(state.traj_label[kept[lc == 1]])
    state.traj_rounds[split_traj] += 1

    # g. staging becomes kept, per-segment sets are cleared
    state.kept_buf, state.staging_buf = state.staging_buf, state.kept_buf
    state.n_kept, state.n_staged = state.n_staged, 0
    lc[:] = 0
    is_idx[:] = 0
    lacc[:] = 0
    state.rounds += 1
    logger.debug("round %d: %d feature point(s) added, %d kept", state.rounds, added, state.n_kept)
    return state, False


def _batches(t_len: np.ndarray, capacity: int) -> list[tuple[int, int]]:
    """Consecutive runs of whole trajectories holding at most `capacity` points each."""
    runs, start, filled = [], 0, 0
    for k, length in enumerate(t_len):
        if filled and filled + length > capacity:
            runs.append((start, k))
            start, filled = k, 0
        filled += int(length)
    if len(t_len):
        runs.append((start, len(t_len)))
    return runs


def parallel_retained_indices(
    store: FlatTrajectoryStore,
    eps: CompressionThreshold | float,
    *,
    workers: WorkerPool | int | None = None,
    block: Block | None = None,
    batch_points: int | None = None,
) -> tuple[list[np.ndarray], BatchCompressionReport]:
    """
    Retained point indices (relative to each trajectory) for every trajectory
    of the store, plus a report with timings and per-trajectory rounds.
    """
    epsilon = _epsilon(eps)
    block = block or Block.from_settings()
    pool, owned = ensure_pool(workers)
    report = BatchCompressionReport(backend="parallel", epsilon=epsilon, workers=pool.workers)
    started = time.perf_counter()
    retained: list[np.ndarray] = []
    rounds: list[np.ndarray] = []
    try:
        capacity = max(batch_points or settings.TRAJFORGE_BATCH_POINTS, store.max_len, 1)
        ws = Workspace(capacity)
        for a, b in _batches(store.t_len, capacity):
            t_len = store.t_len[a:b]
            lo = int(store.offsets[a])
            hi = lo + int(t_len.sum())
            local_offsets = store.offsets[a:b] - lo

            tick = time.perf_counter()
            n = ws.load(store.x[lo:hi], store.y[lo:hi])
            report.staging_seconds += time.perf_counter() - tick

            tick = time.perf_counter()
            if t_len.max() < 2:
                kept = np.arange(n, dtype=np.int64)
                batch_rounds = np.zeros(len(t_len), dtype=np.int64)
            else:
                state = _start_batch(ws, n, t_len)
                done = False
                while not done:
                    state, done = _round(state, epsilon, pool, block)
                kept = state.kept.copy()
                batch_rounds = state.traj_rounds
            report.compute_seconds += time.perf_counter() - tick

            tick = time.perf_counter()
            cuts = np.searchsorted(kept, local_offsets[1:])
            retained.extend(part - off for part, off in zip(np.split(kept, cuts), local_offsets))
            rounds.append(batch_rounds)
            report.staging_seconds += time.perf_counter() - tick
    finally:
        if owned:
            pool.close()
    report.iterations = np.concatenate(rounds) if rounds else np.zeros(0, dtype=np.int64)
    report.n_original = store.t_len.copy()
    report.n_compressed = np.array([len(r) for r in retained], dtype=np.int64)
    report.total_seconds = time.perf_counter() - started
    return retained, report


def dp_compress_parallel(
    store: FlatTrajectoryStore,
    eps: CompressionThreshold | float,
    workers: WorkerPool | int | None = None,
    *,
    block: Block | None = None,
    batch_points: int | None = None,
) -> tuple[FlatTrajectoryStore, BatchCompressionReport]:
    """Compress a merged store; the output store keeps trajectory order and MMSIs."""
    retained, report = parallel_retained_indices(store, eps, workers=workers, block=block, batch_points=batch_points)
    tick = time.perf_counter()
    if retained:
        picks = np.concatenate([idx + off for idx, off in zip(retained, store.offsets)])
    else:
        picks = np.zeros(0, dtype=np.int64)
    t_len = report.n_compressed.copy()
    out = FlatTrajectoryStore(
        t=store.t[picks], x=store.x[picks], y=store.y[picks], lon=store.lon[picks], lat=store.lat[picks],
        t_len=t_len, offsets=np.concatenate(([0], np.cumsum(t_len)[:-1])) if len(t_len) else t_len,
        mmsi_index=store.mmsi_index.copy(),
    )
    elapsed = time.perf_counter() - tick
    report.staging_seconds += elapsed
    report.total_seconds += elapsed
    logger.info(
        "parallel compression: %d -> %d points, %d trajectories, eps=%g, %d worker(s), %.3fs",
        report.total_original, report.total_compressed, len(store), report.epsilon, report.workers, report.total_seconds,
    )
    return out, report

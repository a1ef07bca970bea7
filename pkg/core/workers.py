#
# core/workers.py
#
"""
Fixed-size fork-join worker pool shared by the scan primitives, the parallel
compressor and the density pipeline.

Every ``map`` call is a barrier: it returns only after all tasks finished, and
results come back in task order, so callers stay deterministic whatever the
pool size. Threads are used instead of processes because the tasks work on
slices of shared numpy arrays and numpy releases the GIL inside its kernels.
"""
from __future__ import annotations

import logging
from multiprocessing.pool import ThreadPool
from typing import Callable, Iterable, TypeVar

from django.conf import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: int | None = None) -> int:
    """--workers wins, then TRAJFORGE_WORKERS, never below 1."""
    if workers is None:
        workers = settings.TRAJFORGE_WORKERS
    return max(1, int(workers))


def split_range(n_items: int, parts: int) -> list[tuple[int, int]]:
    """Cut [0, n_items) into at most `parts` contiguous, disjoint, near-equal ranges."""
    if n_items <= 0:
        return []
    parts = max(1, min(parts, n_items))
    step, extra = divmod(n_items, parts)
    ranges, start = [], 0
    for k in range(parts):
        stop = start + step + (1 if k < extra else 0)
        ranges.append((start, stop))
        start = stop
    return ranges


class WorkerPool:
    """
    Thin wrapper around a thread-backed ``multiprocessing.pool.ThreadPool``.

    With one worker no threads are started and tasks run inline, which keeps
    the serial path free of pool overhead.
    """

    def __init__(self, workers: int | None = None):
        self.workers = resolve_workers(workers)
        self._pool = ThreadPool(processes=self.workers) if self.workers > 1 else None
        logger.debug("Worker pool started with %d worker(s)", self.workers)

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> list[R]:
        items = list(items)
        if self._pool is None or len(items) <= 1:
            return [func(item) for item in items]
        return self._pool.map(func, items)

    def map_ranges(self, func: Callable[[int, int], R], n_items: int, parts: int | None = None) -> list[R]:
        """Run func(start, stop) over disjoint ranges covering [0, n_items)."""
        ranges = split_range(n_items, parts or self.workers)
        return self.map(lambda r: func(*r), ranges)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def ensure_pool(pool: WorkerPool | int | None) -> tuple[WorkerPool, bool]:
    """
    Accept an existing pool or a worker count. Returns (pool, owned); the
    caller closes the pool only when it owns it.
    """
    if isinstance(pool, WorkerPool):
        return pool, False
    return WorkerPool(pool), True



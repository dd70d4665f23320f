"""Worker-pool helper for independent Monte Carlo repetitions."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "EQKIT_THREADS"


def worker_count(requested: int | None = None) -> int:
    """Requested count, capped by ``EQKIT_THREADS`` when that is set."""
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from exc
    return max(1, n)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Ordered map; runs in-process when a single worker is available."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * n))))

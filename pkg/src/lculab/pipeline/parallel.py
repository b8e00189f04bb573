"""Process-pool map with ``LCULAB_THREADS`` as the worker cap."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

from threadpoolctl import threadpool_limits

ENV_VAR = "LCULAB_THREADS"


def worker_count(requested: int | None = None) -> int:
    """``requested`` if given, else ``$LCULAB_THREADS``, else 1."""
    if requested is None:
        raw = os.environ.get(ENV_VAR, "").strip()
        requested = int(raw) if raw else 1
    if requested < 1:
        raise ValueError(f"{ENV_VAR} must be >= 1")
    return requested


def _init_worker(initializer, initargs) -> None:
    # one BLAS thread per process: results do not depend on the pool size
    threadpool_limits(1)
    if initializer is not None:
        initializer(*initargs)


def chunked(items: Sequence, size: int) -> list[Sequence]:
    return [items[i:i + size] for i in range(0, len(items), size)]


def parallel_map(
    fn: Callable,
    items: Sequence,
    threads: int | None = None,
    initializer: Callable | None = None,
    initargs: tuple = (),
) -> list:
    """``[fn(x) for x in items]`` across worker processes, results in input order."""
    n = worker_count(threads)
    if n == 1 or len(items) <= 1:
        with threadpool_limits(1):
            if initializer is not None:
                initializer(*initargs)
            return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n, initializer=_init_worker, initargs=(initializer, initargs)) as pool:
        return list(pool.map(fn, items))

"""Fixed-chunk work partitioning for the kernels.

Work is split at CHUNK-element boundaries that never depend on the worker
count, and chunk results are always combined in chunk order, so numeric
results are identical whether a kernel runs inline or on a thread pool.
The TENSORLITE_THREADS environment variable caps the pool size; a value of
1 forces fully sequential execution.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

CHUNK = 1 << 16

# elementwise kernels only bother with the pool above this size
PARALLEL_THRESHOLD = 1 << 20

_override: int | None = None


def max_workers() -> int:
    if _override is not None:
        return _override
    env = os.environ.get("TENSORLITE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(os.cpu_count() or 1, 8)


@contextmanager
def thread_limit(n: int):
    """Force the worker count for the dynamic extent (used by bench/tests)."""
    global _override
    prev = _override
    _override = max(1, int(n))
    try:
        yield
    finally:
        _override = prev


def spans(n: int) -> list[tuple[int, int]]:
    """[start, stop) chunk boundaries covering range(n); independent of workers."""
    if n <= 0:
        return []
    return [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]


def run_spans(fn, n: int) -> list:
    """Apply fn(start, stop) per chunk, returning results in chunk order."""
    parts = spans(n)
    workers = max_workers()
    if workers <= 1 or len(parts) <= 1 or n < PARALLEL_THRESHOLD:
        return [fn(s, e) for s, e in parts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, s, e) for s, e in parts]
        return [f.result() for f in futures]

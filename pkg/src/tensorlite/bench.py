"""Throughput measurements for the kernel hot paths.

Numbers are informational, never part of acceptance: repeated runs vary.
Each row times one op at one size under a forced single worker and again
under the default worker count.
"""

from __future__ import annotations

import time

from . import core as T
from .autograd import no_grad
from .parallel import max_workers, thread_limit

ELEMENTWISE_SIZES = (10_000, 1_000_000, 10_000_000)
MATMUL_SIZES = (64, 256, 512)


def _time(fn, min_reps=1) -> float:
    best = None
    for _ in range(min_reps):
        t0 = time.perf_counter()
        fn()
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return best


def bench_rows(elementwise_sizes=ELEMENTWISE_SIZES, matmul_sizes=MATMUL_SIZES):
    """Yields dict rows: op, n, flops, secs_single, secs_multi."""
    with no_grad():
        for n in elementwise_sizes:
            a = T.uniform((n,), rng=0)
            b = T.uniform((n,), rng=1)
            for op_name, fn, flops in (
                ("add", lambda: T.add(a, b), n),
                ("mul", lambda: T.mul(a, b), n),
                ("reduce-sum", lambda: T.sum(a), n),
            ):
                with thread_limit(1):
                    t1 = _time(fn)
                tm = _time(fn)
                yield {"op": op_name, "n": n, "flops": flops,
                       "secs_single": t1, "secs_multi": tm}
        for m in matmul_sizes:
            x = T.uniform((m, m), rng=2)
            w = T.uniform((m, m), rng=3)
            fn = lambda: T.matmul(x, w)
            with thread_limit(1):
                t1 = _time(fn)
            tm = _time(fn)
            yield {"op": "matmul", "n": m * m, "flops": 2 * m * m * m,
                   "secs_single": t1, "secs_multi": tm}


def format_report(rows) -> str:
    lines = [
        f"workers: single=1 multi={max_workers()}",
        f"{'op':<12}{'n':>10}{'s(1thr)':>12}{'s(multi)':>12}"
        f"{'elem/s':>12}{'GFLOP/s':>10}",
    ]
    for r in rows:
        eps = r["n"] / r["secs_multi"] if r["secs_multi"] else float("inf")
        gf = r["flops"] / r["secs_multi"] / 1e9 if r["secs_multi"] else float("inf")
        lines.append(
            f"{r['op']:<12}{r['n']:>10}{r['secs_single']:>12.4f}"
            f"{r['secs_multi']:>12.4f}{eps:>12.3g}{gf:>10.3g}"
        )
    return "\n".join(lines)

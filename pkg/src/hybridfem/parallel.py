"""Optional worker-thread fan-out, capped by HYBRIDFEM_THREADS.

Work items are pure, so threading never changes results; output order is
by item index regardless of completion order.  Default is serial.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["worker_count", "parallel_map"]


def worker_count() -> int:
    raw = os.environ.get("HYBRIDFEM_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items: list) -> list:
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))

"""Ordered parallel map used by the sweep, verification and Monte Carlo code."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "BEAMCAP_THREADS"


def worker_count(requested=None) -> int:
    """Resolve a worker count; ``None`` reads ``BEAMCAP_THREADS`` and 0 means auto."""
    if requested is None:
        raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError("worker count must be >= 0")
    return requested or (os.cpu_count() or 1)


def map_ordered(func, items, workers=None) -> list:
    """``[func(x) for x in items]``, possibly threaded; output order follows ``items``."""
    items = list(items)
    n = min(worker_count(workers), max(1, len(items)))
    if n == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))

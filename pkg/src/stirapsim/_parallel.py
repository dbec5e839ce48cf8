"""Deterministic worker-pool helper.

Results are always assembled in input order, so outputs are identical for
any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def map_ordered(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    workers = min(workers, len(items))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(items) // (4 * workers))
        return list(pool.map(fn, items, chunksize=chunk))

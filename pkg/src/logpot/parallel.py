"""Worker-count control and a deterministic row-parallel map.

The LOGPOT_THREADS environment variable overrides the worker count.
Results are deterministic at any thread count: each chunk writes a
disjoint slice of the output, so scheduling order cannot change values.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence


def worker_count() -> int:
    env = os.environ.get("LOGPOT_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"LOGPOT_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ValueError("LOGPOT_THREADS must be >= 1")
        return n
    return min(4, os.cpu_count() or 1)


def run_chunked(fn: Callable[[int, int], None], total: int, workers: int | None = None) -> None:
    """Call fn(start, stop) over a partition of range(total), possibly in threads.

    fn must write only to rows [start, stop) of its output buffer.
    """
    w = workers if workers is not None else worker_count()
    if w <= 1 or total < 2 * w:
        fn(0, total)
        return
    step = (total + w - 1) // w
    bounds = [(i, min(i + step, total)) for i in range(0, total, step)]
    with ThreadPoolExecutor(max_workers=w) as pool:
        futures = [pool.submit(fn, a, b) for a, b in bounds]
        for f in futures:
            f.result()


def seeded_sequence(seed: int, count: int) -> Sequence[int]:
    """Per-restart seeds: seed + index, matching the restart tie-break order."""
    return [seed + i for i in range(count)]

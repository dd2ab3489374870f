"""Counter-mode random streams.

Every Monte Carlo loop in the package is split into fixed-size chunks and
chunk ``c`` of a run with master seed ``s`` always draws from
``default_rng([s, tag, c])``. Because the chunk layout never depends on the
worker count, results are identical for any ``--threads`` value.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

CHUNK = 2048
MASK64 = (1 << 64) - 1

T = TypeVar("T")


def stream(seed: int, *counter: int) -> np.random.Generator:
    """Generator for the (seed, *counter) cell of the counter space."""
    return np.random.default_rng([int(seed) & MASK64, *(int(c) & MASK64 for c in counter)])


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    if total <= 0:
        return []
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def default_threads() -> int:
    raw = os.environ.get("CASCADELAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn: Callable[[int], T], items: Iterable[int], threads: int | None = None) -> list[T]:
    """Map ``fn`` over items, preserving order, using up to ``threads`` workers."""
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))

"""Chunked thread-pool map with order-preserving merge.

Workers only read shared immutable arrays and return per-chunk results, so the
concatenated output does not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

MIN_CHUNK = 4096


def chunk_bounds(n: int, threads: int, min_chunk: int | None = None) -> list[tuple[int, int]]:
    """Contiguous ``[lo, hi)`` ranges covering ``range(n)``."""
    min_chunk = MIN_CHUNK if min_chunk is None else min_chunk
    if n <= 0:
        return [(0, 0)]
    k = max(1, min(threads, -(-n // min_chunk)))
    size = -(-n // k)
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def map_chunks(fn: Callable[[int, int], T], n: int, threads: int = 1, min_chunk: int | None = None) -> list[T]:
    bounds = chunk_bounds(n, threads, min_chunk)
    if threads <= 1 or len(bounds) == 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))

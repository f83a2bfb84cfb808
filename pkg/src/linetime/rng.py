"""Counter-based random streams keyed by ``(seed, replication)``.

Every replication owns a Philox-4x64 stream whose 128-bit key packs the
64-bit seed and the replication index, so draws never depend on how
replications are scheduled across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

_MASK64 = (1 << 64) - 1

T = TypeVar("T")


def stream(seed: int, rep: int) -> np.random.Generator:
    if rep < 0 or rep > _MASK64:
        raise ValueError("replication index must fit in 64 bits")
    key = ((int(seed) & _MASK64) << 64) | int(rep)
    return np.random.Generator(np.random.Philox(key=key))


def default_threads() -> int:
    env = os.environ.get("LINETIME_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"LINETIME_THREADS={env!r} is not an integer") from None
        if n < 1:
            raise ValueError("LINETIME_THREADS must be >= 1")
        return n
    return 1


def blocks(n: int, size: int) -> list[range]:
    return [range(lo, min(n, lo + size)) for lo in range(0, n, size)]


def run_blocks(fn: Callable[[range], T], n: int, block_size: int, threads: int | None = None) -> list[T]:
    """Apply ``fn`` to fixed replication blocks, returning results in block order.

    Block boundaries depend only on ``n`` and ``block_size``; ``threads`` only
    changes how many blocks are in flight at once.
    """
    parts: Sequence[range] = blocks(n, block_size)
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(parts) <= 1:
        return [fn(r) for r in parts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, parts))

"""Small shared helpers: rounding, hashing, deterministic sub-streams, thread maps."""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stable_hash64(text: str) -> int:
    """Deterministic 64-bit hash of a string (independent of PYTHONHASHSEED)."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def substream(seed: int, *salts: int | str) -> np.random.Generator:
    """Named RNG sub-stream: all randomness flows from one seed plus stable salts."""
    entropy: list[int] = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for salt in salts:
        entropy.append(salt if isinstance(salt, int) else stable_hash64(salt))
    return np.random.default_rng(entropy)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def default_threads() -> int:
    env = os.environ.get("CALE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Order-preserving map; results are identical regardless of thread count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))

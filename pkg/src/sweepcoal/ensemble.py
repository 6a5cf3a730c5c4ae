"""Replicate seeding, thread fan-out and summary estimates.

Replicate i of a run with master seed m is driven by the 32-bit seed
``fmix32((base + i) mod 2**32)`` where ``base`` is the first word of
``SeedSequence(m)``. fmix32 (the MurmurHash3 finalizer) is a bijection, so
replicate seeds within a run never collide, and any replicate can be
regenerated on its own.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
MASK32 = 0xFFFFFFFF


def fmix32(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.uint64) & MASK32
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & MASK32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & MASK32
    h ^= h >> 16
    return h.astype(np.uint32)


def replicate_seeds(master: int, start: int, stop: int) -> np.ndarray:
    base = int(np.random.SeedSequence(master).generate_state(1)[0])
    idx = (base + np.arange(start, stop, dtype=np.uint64)) & MASK32
    return fmix32(idx)


def master_from(rng: np.random.Generator) -> int:
    """A master seed drawn from a caller's generator."""
    return int(rng.integers(0, 2**63))


def default_threads() -> int:
    return os.cpu_count() or 1


def chunks(reps: int, threads: int, min_chunk: int = 256) -> list[tuple[int, int]]:
    """Contiguous index ranges; the split never affects results, only scheduling."""
    if reps <= 0:
        return []
    k = max(1, min(threads * 4, math.ceil(reps / min_chunk)))
    edges = np.linspace(0, reps, k + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges, edges[1:]) if b > a]


def fan_out(fn: Callable[[int, int], T], reps: int, threads: int | None = None) -> list[T]:
    """Run ``fn(start, stop)`` over chunks and return results in index order."""
    threads = threads or default_threads()
    parts = chunks(reps, threads)
    if threads == 1 or len(parts) <= 1:
        return [fn(a, b) for a, b in parts]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda ab: fn(*ab), parts))


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    n: int

    @classmethod
    def of(cls, x: Sequence[float] | np.ndarray) -> Estimate:
        x = np.asarray(x, dtype=float)
        n = x.size
        if n == 0:
            return cls(math.nan, math.nan, 0)
        m = math.fsum(x) / n
        if n == 1:
            return cls(m, math.nan, 1)
        var = math.fsum((x - m) ** 2) / (n - 1)
        return cls(m, math.sqrt(var / n), n)

    @classmethod
    def proportion(cls, hits: int, n: int) -> Estimate:
        p = hits / n
        return cls(p, math.sqrt(p * (1 - p) / n), n)

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.se

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "n": self.n}

"""Empirical partition laws and total-variation comparisons with bootstrap errors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError
from .partitions import Partition, PartitionDistribution, enumerate_partitions


@dataclass(frozen=True)
class EmpiricalLaw:
    """Counts of sampled partitions over the lattice in enumeration order."""

    n: int
    counts: np.ndarray

    @classmethod
    def from_partitions(cls, n: int, parts: Iterable[Partition]) -> EmpiricalLaw:
        index = {p: i for i, p in enumerate(enumerate_partitions(n))}
        counts = np.zeros(len(index), np.int64)
        for p in parts:
            if p.n != n:
                raise DimensionError(f"partition of [{p.n}] in a law on [{n}]")
            counts[index[p]] += 1
        return cls(n, counts)

    @classmethod
    def from_rgs(cls, rgs: np.ndarray) -> EmpiricalLaw:
        rgs = np.asarray(rgs)
        return cls.from_partitions(rgs.shape[1], (Partition.from_rgs(r) for r in rgs))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probs(self) -> np.ndarray:
        if self.total == 0:
            raise DomainError("empty sample")
        return self.counts / self.total

    def distribution(self) -> PartitionDistribution:
        parts = enumerate_partitions(self.n)
        return PartitionDistribution(self.n, {p: float(q) for p, q in zip(parts, self.probs) if q > 0})

    def resample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Bootstrap probability vectors, one per row."""
        return rng.multinomial(self.total, self.probs, size=size) / self.total


Law = EmpiricalLaw | PartitionDistribution


def _vector(law: Law, n: int) -> np.ndarray:
    if law.n != n:
        raise DimensionError(f"laws on [{law.n}] and [{n}]")
    if isinstance(law, EmpiricalLaw):
        return law.probs
    return law.as_vector(enumerate_partitions(n))


def _draws(law: Law, n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(law, EmpiricalLaw):
        return law.resample(rng, size)
    return np.broadcast_to(_vector(law, n), (size, len(enumerate_partitions(n))))


def tv(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum(axis=-1)


@dataclass(frozen=True)
class TVEstimate:
    value: float
    se: float

    def to_dict(self) -> dict:
        return {"value": self.value, "se": self.se}


def tv_estimate(a: Law, b: Law, rng: np.random.Generator, boot: int = 400) -> TVEstimate:
    """TV between two laws; empirical ones are resampled independently for the SE."""
    n = a.n
    value = float(tv(_vector(a, n), _vector(b, n)))
    if not any(isinstance(x, EmpiricalLaw) for x in (a, b)):
        return TVEstimate(value, 0.0)
    reps = tv(_draws(a, n, rng, boot), _draws(b, n, rng, boot))
    return TVEstimate(value, float(reps.std(ddof=1)))


def tv_gap(emp: EmpiricalLaw, ref_a: Law, ref_b: Law, rng: np.random.Generator,
           boot: int = 400) -> TVEstimate:
    """TV(emp, a) - TV(emp, b), with ``emp`` resampled once per draw for both terms."""
    n = emp.n
    e = _vector(emp, n)
    value = float(tv(e, _vector(ref_a, n)) - tv(e, _vector(ref_b, n)))
    E = emp.resample(rng, boot)
    d = tv(E, _draws(ref_a, n, rng, boot)) - tv(E, _draws(ref_b, n, rng, boot))
    return TVEstimate(value, float(d.std(ddof=1)))


def separated(lo: TVEstimate, hi: TVEstimate, z: float = 2.0) -> bool:
    """True when ``lo`` is below ``hi`` by more than z combined standard errors."""
    return hi.value - lo.value > z * math.hypot(lo.se, hi.se)


def strictly_decreasing(seq: Sequence[TVEstimate], z: float = 2.0) -> bool:
    return all(separated(b, a, z) for a, b in zip(seq, seq[1:]))

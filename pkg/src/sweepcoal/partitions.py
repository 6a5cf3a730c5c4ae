"""Set partitions of {1..n} and the exchangeable-partition samplers.

Partitions are kept in canonical form: blocks sorted by least element,
elements sorted within blocks. Internally a partition is also available as
its restricted growth string (``rgs``), the 0-based block index of every
element, which is what the numba kernels produce.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from .errors import DimensionError, DomainError, SizeLimitError

BELL_GUARD = 12


@dataclass(frozen=True, order=True)
class Partition:
    """A partition of {1..n} in canonical block order."""

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = sorted(itertools.chain.from_iterable(self.blocks))
        if seen != list(range(1, self.n + 1)):
            raise DomainError(f"blocks {self.blocks} do not partition 1..{self.n}")
        if any(len(b) == 0 for b in self.blocks):
            raise DomainError("empty block")
        canon = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        if canon != self.blocks:
            raise DomainError("blocks are not in canonical order; use Partition.from_blocks")

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], n: int | None = None) -> Partition:
        bl = [tuple(sorted(b)) for b in blocks]
        bl = tuple(sorted(b for b in bl))
        if n is None:
            n = sum(len(b) for b in bl)
        return cls(n, bl)

    @classmethod
    def from_rgs(cls, rgs: Sequence[int]) -> Partition:
        groups: dict[int, list[int]] = {}
        for i, g in enumerate(rgs):
            groups.setdefault(int(g), []).append(i + 1)
        return cls.from_blocks(groups.values(), len(rgs))

    @classmethod
    def singletons(cls, n: int) -> Partition:
        return cls(n, tuple((i,) for i in range(1, n + 1)))

    @classmethod
    def single_block(cls, n: int) -> Partition:
        return cls(n, (tuple(range(1, n + 1)),))

    @property
    def rgs(self) -> tuple[int, ...]:
        out = [0] * self.n
        for k, b in enumerate(self.blocks):
            for i in b:
                out[i - 1] = k
        return tuple(out)

    def __len__(self) -> int:
        return len(self.blocks)

    def is_singletons(self) -> bool:
        return len(self.blocks) == self.n

    def restrict(self, m: int) -> Partition:
        """Restriction to {1..m}."""
        if m > self.n:
            raise DimensionError(f"cannot restrict a partition of {self.n} to {m}")
        return Partition.from_blocks(
            [tuple(i for i in b if i <= m) for b in self.blocks if b[0] <= m], m
        )

    def is_coarsening_of(self, other: Partition) -> bool:
        if other.n != self.n:
            return False
        where = {i: k for k, b in enumerate(self.blocks) for i in b}
        return all(len({where[i] for i in b}) == 1 for b in other.blocks)

    def __str__(self) -> str:
        return "".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)

    @classmethod
    def parse(cls, text: str) -> Partition:
        """Inverse of ``str``: ``"{1,2}{3}"``."""
        body = text.strip()
        if not (body.startswith("{") and body.endswith("}")):
            raise DomainError(f"cannot parse partition {text!r}")
        parts = body[1:-1].split("}{")
        return cls.from_blocks([tuple(int(x) for x in p.split(",")) for p in parts])


@dataclass(frozen=True)
class RankedMassVector:
    """Nonincreasing masses in [0, 1] with sum at most 1; the tail is zero."""

    masses: tuple[float, ...]

    def __post_init__(self):
        m = self.masses
        if any(x < 0 for x in m):
            raise DomainError("negative mass")
        if any(m[i] < m[i + 1] for i in range(len(m) - 1)):
            raise DomainError("masses are not nonincreasing")
        if math.fsum(m) > 1 + 1e-12:
            raise DomainError(f"masses sum to {math.fsum(m)} > 1")

    @property
    def dust(self) -> float:
        return max(0.0, 1.0 - math.fsum(self.masses))


@dataclass(frozen=True)
class StickBreakingParams:
    theta: float
    m: int

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError(f"theta={self.theta} outside [0, 1]")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m={self.m} must be a positive integer")


@dataclass(frozen=True)
class PartitionDistribution:
    """An explicit law on the partitions of {1..n}."""

    n: int
    weights: Mapping[Partition, float] = field(hash=False)

    def __post_init__(self):
        total = math.fsum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {total!r}, not 1")
        for p, w in self.weights.items():
            if p.n != self.n:
                raise DimensionError(f"partition {p} is not a partition of 1..{self.n}")
            if w < 0:
                raise DomainError(f"negative weight on {p}")

    def __getitem__(self, p: Partition) -> float:
        return self.weights.get(p, 0.0)

    @classmethod
    def from_counts(cls, n: int, counts: Mapping[Partition, int]) -> PartitionDistribution:
        total = sum(counts.values())
        if total == 0:
            raise DomainError("no samples")
        w = {p: c / total for p, c in counts.items() if c}
        # absorb the float rounding of c/total into the largest cell
        top = max(w, key=w.get)
        w[top] += 1.0 - math.fsum(w.values())
        return cls(n, w)

    @classmethod
    def from_samples(cls, n: int, samples: Iterable[Partition]) -> PartitionDistribution:
        return cls.from_counts(n, Counter(samples))

    def as_vector(self, support: Sequence[Partition]) -> np.ndarray:
        return np.array([self[p] for p in support])


def coagulate(pi: Partition, pi_prime: Partition) -> Partition:
    """Merge the blocks of ``pi`` according to ``pi_prime``.

    Block i of ``pi`` (canonical index) joins block j when i and j share a
    block of ``pi_prime``; only the restriction of ``pi_prime`` to
    {1..len(pi)} is used.
    """
    m = len(pi)
    if pi_prime.n < m:
        raise DimensionError(f"pi has {m} blocks but pi' only partitions 1..{pi_prime.n}")
    merged = []
    for b in pi_prime.blocks:
        idx = [i for i in b if i <= m]
        if idx:
            merged.append(tuple(itertools.chain.from_iterable(pi.blocks[i - 1] for i in idx)))
    return Partition.from_blocks(merged, pi.n)


def _check_prob(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")


def sample_two_coin(p: float, n: int, rng: np.random.Generator) -> Partition:
    """One block made of the elements whose p-coin shows heads; the rest singletons."""
    _check_prob(p)
    heads = rng.random(n) < p
    rgs = _heads_to_rgs(heads)
    return Partition.from_rgs(rgs)


def _heads_to_rgs(heads: np.ndarray) -> list[int]:
    rgs, nxt, head_block = [], 0, None
    for h in heads:
        if h:
            if head_block is None:
                head_block, nxt = nxt, nxt + 1
            rgs.append(head_block)
        else:
            rgs.append(nxt)
            nxt += 1
    return rgs


def sample_paintbox(y: RankedMassVector, n: int, rng: np.random.Generator) -> Partition:
    """Kingman paintbox: element i picks box j with probability y_j, dust otherwise."""
    cum = np.cumsum(np.asarray(y.masses, dtype=float))
    boxes = np.searchsorted(cum, rng.random(n), side="right")
    dust = boxes >= len(cum)
    groups: dict[int, int] = {}
    rgs, nxt = [], 0
    for z, d in zip(boxes, dust):
        if d:
            rgs.append(nxt)
            nxt += 1
            continue
        if z not in groups:
            groups[z] = nxt
            nxt += 1
        rgs.append(groups[z])
    return Partition.from_rgs(rgs)


def stick_fragments(theta: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """Unranked fragment lengths (Y~_1, ..., Y~_m) of one stick-breaking draw."""
    if m == 1:
        return np.ones(1)
    k = np.arange(2, m + 1)
    w = rng.beta(1.0, k - 1.0)
    v = np.where(rng.random(m - 1) < theta, w, 0.0)
    # survivors[i] = prod_{j > k_i} (1 - V_j); the break order runs from W_m down to W_2
    one_minus = 1.0 - v
    tail = np.cumprod(one_minus[::-1])[::-1]
    after = np.append(tail[1:], 1.0)
    frags = np.empty(m)
    frags[0] = tail[0]
    frags[1:] = v * after
    return frags


def sample_stick_breaking(params: StickBreakingParams, rng: np.random.Generator) -> RankedMassVector:
    frags = stick_fragments(params.theta, params.m, rng)
    total = math.fsum(frags)
    assert abs(total - 1.0) <= 1e-12, f"stick-breaking fragments sum to {total!r}"
    order = np.argsort(-frags, kind="stable")
    ranked = frags[order]
    ranked = ranked[ranked > 0]
    return RankedMassVector(tuple(float(x) for x in ranked))


def enumerate_partitions(n: int) -> list[Partition]:
    """Every partition of {1..n}, in lexicographic order of restricted growth strings."""
    if n > BELL_GUARD:
        raise SizeLimitError(f"n={n} exceeds the enumeration guard {BELL_GUARD}")
    if n < 1:
        raise DomainError("n must be positive")
    return [Partition.from_rgs(r) for r in _rgs_list(n)]


@lru_cache(maxsize=None)
def _rgs_list(n: int) -> tuple[tuple[int, ...], ...]:
    out = []

    def rec(prefix: list[int], top: int):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for v in range(top + 2):
            prefix.append(v)
            rec(prefix, max(top, v))
            prefix.pop()

    rec([0], 0)
    return tuple(out)


def tv_distance(d1: PartitionDistribution, d2: PartitionDistribution) -> float:
    if d1.n != d2.n:
        raise DimensionError(f"laws on partitions of {d1.n} and {d2.n}")
    keys = set(d1.weights) | set(d2.weights)
    return 0.5 * math.fsum(abs(d1[k] - d2[k]) for k in keys)


def two_coin_law(p: float, n: int) -> PartitionDistribution:
    """Exact Q_{p,n} by enumerating the coin outcomes."""
    _check_prob(p)
    w: dict[Partition, float] = Counter()
    for heads in itertools.product((False, True), repeat=n):
        k = sum(heads)
        w[Partition.from_rgs(_heads_to_rgs(heads))] += p**k * (1 - p) ** (n - k)
    w = {k: v for k, v in w.items() if v > 0}
    return _normalized(n, w)


def _normalized(n: int, w: Mapping[Partition, float]) -> PartitionDistribution:
    total = math.fsum(w.values())
    w = {k: v / total for k, v in w.items()}
    top = max(w, key=w.get)
    w[top] += 1.0 - math.fsum(w.values())
    return PartitionDistribution(n, w)


@njit(cache=True)
def _stick_dp(sizes, theta, m):
    """Probability that a paintbox over R(theta, m) yields one given partition.

    ``sizes`` are the block sizes of the partition. Stages run m, m-1, ..., 2
    (the order in which fragments are broken off); at each stage either no
    remaining element falls into the new fragment or exactly one whole block
    does. Whatever is left at the end must form a single block (fragment 1).
    """
    k = sizes.shape[0]
    n = 0
    for i in range(k):
        n += sizes[i]
    nstate = 1 << k
    rem = np.empty(nstate, np.int64)
    for mask in range(nstate):
        r = n
        for i in range(k):
            if mask & (1 << i):
                r -= sizes[i]
        rem[mask] = r
    dp = np.zeros(nstate)
    dp[0] = 1.0
    new = np.empty(nstate)
    for j in range(m, 1, -1):
        b = j - 1.0
        for mask in range(nstate):
            r = rem[mask]
            if r == 0:
                new[mask] = dp[mask]
            else:
                new[mask] = dp[mask] * (1.0 - theta + theta * b / (b + r))
        if theta > 0.0:
            for mask in range(nstate):
                if dp[mask] == 0.0:
                    continue
                r = rem[mask]
                for i in range(k):
                    bit = 1 << i
                    if mask & bit:
                        continue
                    a = sizes[i]
                    c = r - a
                    # theta * E[W^a (1-W)^c], W ~ Beta(1, j-1)
                    lg = math.lgamma(a + 1.0) + math.lgamma(b + c) - math.lgamma(a + b + c + 1.0)
                    new[mask | bit] += dp[mask] * theta * b * math.exp(lg)
        for mask in range(nstate):
            dp[mask] = new[mask]
    total = 0.0
    for mask in range(nstate):
        left = 0
        for i in range(k):
            if not mask & (1 << i):
                left += 1
        if left <= 1:
            total += dp[mask]
    return total


def stick_breaking_partition_prob(pi: Partition, params: StickBreakingParams) -> float:
    """Exact Q_{R(theta, m), n}(pi)."""
    sizes = np.array([len(b) for b in pi.blocks], dtype=np.int64)
    return float(_stick_dp(sizes, float(params.theta), int(params.m)))


@lru_cache(maxsize=256)
def stick_breaking_law(theta: float, m: int, n: int) -> PartitionDistribution:
    """Exact Q_{R(theta, m), n} over all partitions of {1..n}."""
    params = StickBreakingParams(theta, m)
    by_shape: dict[tuple[int, ...], float] = {}
    w = {}
    for p in enumerate_partitions(n):
        shape = tuple(sorted(len(b) for b in p.blocks))
        if shape not in by_shape:
            by_shape[shape] = stick_breaking_partition_prob(p, params)
        if by_shape[shape] > 0:
            w[p] = by_shape[shape]
    return _normalized(n, w)

"""Lambda-coalescents, the sweep-derived Xi-coalescent, and exact laws on small
partition lattices."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from . import _kernels as K
from .ensemble import fan_out, master_from, replicate_seeds
from .errors import DegenerateMarkError, DomainError, UnsupportedMeasureError
from .measures import LambdaMeasure, jump_row, lambda_rate, total_rates
from .partitions import (
    Partition,
    PartitionDistribution,
    coagulate,
    enumerate_partitions,
    stick_breaking_law,
)
from .sweepspec import SweepSpec

_EMPTY_F = np.empty(0)
_EMPTY_I = np.empty(0, np.int64)


@dataclass(frozen=True)
class GenealogyPath:
    """Jump times and states of a coalescent started from singletons.

    ``lengths[k-1]`` is the total time spent by blocks of size k (k = 1..n-1),
    which is all the branch information the sample statistics need.
    """

    n: int
    times: tuple[float, ...]
    partitions: tuple[Partition, ...]
    absorbed: bool
    end: float
    lengths: np.ndarray = field(compare=False, repr=False)
    null_events: int = 0

    def __post_init__(self):
        if self.times[0] != 0.0 or not self.partitions[0].is_singletons():
            raise DomainError("a path starts at (0, all singletons)")
        for (t0, p0), (t1, p1) in zip(zip(self.times, self.partitions),
                                      zip(self.times[1:], self.partitions[1:])):
            if not t1 > t0:
                raise DomainError("transition times must increase strictly")
            if not (len(p1) < len(p0) and p1.is_coarsening_of(p0)):
                raise DomainError(f"{p1} does not strictly coarsen {p0}")

    def at(self, t: float) -> Partition:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.partitions[max(i, 0)]

    @property
    def external_length(self) -> float:
        return float(self.lengths[0]) if self.n > 1 else 0.0

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    def block_counts(self) -> list[int]:
        return [len(p) for p in self.partitions]


@dataclass(frozen=True)
class XiSweepMeasure:
    spec: SweepSpec
    two_n: int

    def __post_init__(self):
        if int(self.two_n) != self.two_n or self.two_n < 2:
            raise DomainError(f"twoN={self.two_n} must be an integer >= 2")
        for i, a in enumerate(self.spec.atoms):
            if a.rate > 0 and math.floor(self.two_n * a.s) < 1:
                raise DegenerateMarkError(
                    f"atoms[{i}]: floor(2N s) = floor({self.two_n} * {a.s}) < 1 fragment"
                )

    @property
    def log_two_n(self) -> float:
        return math.log(self.two_n)

    def marks(self):
        """(rate, s, theta, M) per atom with positive rate; theta clipped at 1."""
        out = []
        for a in self.spec.atoms:
            if a.rate <= 0:
                continue
            theta = min(1.0, self.spec.r(a.x) / (a.s * self.log_two_n))
            out.append((a.rate, a.s, theta, int(math.floor(self.two_n * a.s))))
        return out

    def kernel_args(self):
        mk = self.marks()
        return (
            np.cumsum([m[0] for m in mk]).astype(float) if mk else _EMPTY_F,
            np.array([m[1] for m in mk], dtype=float),
            np.array([m[2] for m in mk], dtype=float),
            np.array([m[3] for m in mk], dtype=np.int64),
        )


def _lambda_args(measure: LambdaMeasure):
    kind, a1, a2, w = measure.eta_components()
    return kind, a1, a2, np.cumsum(w) if w.size else _EMPTY_F


def _no_xi():
    return _EMPTY_F, _EMPTY_F, _EMPTY_F, _EMPTY_I


def _no_lambda():
    return _EMPTY_I, _EMPTY_F, _EMPTY_F, _EMPTY_F


def _run_path(mode, n, a, largs, xargs, horizon, rng) -> GenealogyPath:
    if n < 1:
        raise DomainError("n must be positive")
    K.seed(int(rng.integers(0, 2**32)))
    grp = np.empty(n, np.int64)
    lengths = np.zeros(n + 1)
    visited = np.zeros(n + 1, np.int8)
    rec_t = np.zeros(n)
    rec_g = np.zeros((n, n), np.int64)
    nrec, t, absorbed, nulls = K.coalescent_core(mode, n, a, *largs, *xargs, horizon, grp,
                                                 lengths, visited, rec_t, rec_g)
    parts = tuple(Partition.from_rgs(rec_g[i]) for i in range(nrec))
    return GenealogyPath(n, tuple(float(x) for x in rec_t[:nrec]), parts, bool(absorbed),
                         float(t), lengths[1:n].copy(), int(nulls))


def simulate_lambda(measure: LambdaMeasure, n: int, rng: np.random.Generator,
                    horizon: float = math.inf) -> GenealogyPath:
    """Pairs merge at rate a; eta events flip a p-coin per block."""
    return _run_path(0, n, measure.kingman, _lambda_args(measure), _no_xi(), horizon, rng)


def simulate_xi_sweep(measure: XiSweepMeasure, n: int, rng: np.random.Generator,
                      horizon: float = math.inf) -> GenealogyPath:
    """Pairs merge at rate 1; sweep events (rate = total mu mass) paint blocks
    with a stick-breaking paintbox with probability s."""
    return _run_path(1, n, 1.0, _no_lambda(), measure.kernel_args(), horizon, rng)


@dataclass(frozen=True)
class CoalescentEnsemble:
    n: int
    rgs: np.ndarray        # state at the end (horizon or absorption)
    lengths: np.ndarray    # reps x (n-1), by block size
    end: np.ndarray
    visited: np.ndarray    # reps x (n+1) flags, empty unless requested
    nulls: np.ndarray

    @property
    def reps(self) -> int:
        return self.end.size

    def law(self) -> PartitionDistribution:
        return PartitionDistribution.from_samples(self.n, (Partition.from_rgs(r) for r in self.rgs))


def coalescent_ensemble(measure: LambdaMeasure | XiSweepMeasure, n: int, reps: int, seed: int, *,
                        horizon: float = math.inf, visits: bool = False,
                        threads: int | None = None) -> CoalescentEnsemble:
    if isinstance(measure, LambdaMeasure):
        mode, a, largs, xargs = 0, measure.kingman, _lambda_args(measure), _no_xi()
        if math.isinf(horizon) and measure.kingman == 0 and measure.eta_mass == 0:
            raise UnsupportedMeasureError("measure never merges; give a finite horizon")
    else:
        mode, a, largs, xargs = 1, 1.0, _no_lambda(), measure.kernel_args()
    rgs = np.zeros((reps, n), np.int64)
    lengths = np.zeros((reps, max(n - 1, 0)))
    end = np.zeros(reps)
    visited = np.zeros((reps if visits else 0, n + 1), np.int8)
    nulls = np.zeros(reps, np.int64)

    def work(lo, hi):
        K.coalescent_batch(replicate_seeds(seed, lo, hi), mode, n, a, *largs, *xargs, horizon,
                           rgs[lo:hi], lengths[lo:hi], end[lo:hi],
                           visited[lo:hi] if visits else visited, nulls[lo:hi])

    fan_out(work, reps, threads)
    return CoalescentEnsemble(n, rgs, lengths, end, visited, nulls)


def first_jump_sizes(measure: LambdaMeasure, b: int, reps: int, seed: int) -> np.ndarray:
    """Sizes of the first effective merger from b blocks, one per replicate."""
    out = np.zeros(reps, np.int64)
    K.first_jump_batch(replicate_seeds(seed, 0, reps), b, measure.kingman, *_lambda_args(measure), out)
    return out


def jump_law(measure: LambdaMeasure, b: int) -> np.ndarray:
    """P(next merger has size k), k = 2..b."""
    row = jump_row(measure, b)
    return row / row.sum()


# --------------------------------------------------------------------------
# Kingman coupling
# --------------------------------------------------------------------------

def _require_unit_kingman(measure: LambdaMeasure):
    if measure.kingman != 1.0:
        raise UnsupportedMeasureError(
            f"coupling is defined for delta_0 + Lambda_0; kingman mass is {measure.kingman}"
        )


def coupled_kingman_lambda(measure: LambdaMeasure, n: int, rng: np.random.Generator):
    """(lambda_path, kingman_path, identical) driven by shared pair points."""
    _require_unit_kingman(measure)
    K.seed(int(rng.integers(0, 2**32)))
    tk, tl = np.zeros(n), np.zeros(n)
    gk, gl = np.zeros((n, n), np.int64), np.zeros((n, n), np.int64)
    same, jk, jl, _, nk, nl = K.coupled_core(n, *_lambda_args(measure), tk, gk, tl, gl)

    def path(t, g, m, J):
        lengths = np.full(max(n - 1, 0), np.nan)
        if n > 1:
            lengths[0] = J
        return GenealogyPath(n, tuple(float(x) for x in t[:m]),
                             tuple(Partition.from_rgs(g[i]) for i in range(m)),
                             True, float(t[m - 1]), lengths)

    return path(tl, gl, nl, jl), path(tk, gk, nk, jk), bool(same)


@dataclass(frozen=True)
class CoupledEnsemble:
    identical: np.ndarray
    j_kingman: np.ndarray
    j_lambda: np.ndarray
    eta_mergers: np.ndarray


def coupled_ensemble(measure: LambdaMeasure, n: int, reps: int, seed: int,
                     threads: int | None = None) -> CoupledEnsemble:
    _require_unit_kingman(measure)
    args = _lambda_args(measure)
    ident = np.zeros(reps, np.bool_)
    jk, jl = np.zeros(reps), np.zeros(reps)
    ev = np.zeros(reps, np.int64)

    def work(a, b):
        K.coupled_batch(replicate_seeds(seed, a, b), n, *args, ident[a:b], jk[a:b], jl[a:b], ev[a:b])

    fan_out(work, reps, threads)
    return CoupledEnsemble(ident, jk, jl, ev)


# --------------------------------------------------------------------------
# exact laws on the partition lattice
# --------------------------------------------------------------------------

EXACT_MAX_N = 6


def _lattice(n: int):
    if n > EXACT_MAX_N:
        raise DomainError(f"exact laws are limited to n <= {EXACT_MAX_N}")
    parts = enumerate_partitions(n)
    return parts, {p: i for i, p in enumerate(parts)}


def _subset_merge(pi: Partition, idx: tuple[int, ...]) -> Partition:
    keep = [b for i, b in enumerate(pi.blocks) if i not in idx]
    merged = tuple(itertools.chain.from_iterable(pi.blocks[i] for i in idx))
    return Partition.from_blocks(keep + [merged], pi.n)


@lru_cache(maxsize=64)
def lambda_generator(measure: LambdaMeasure, n: int) -> np.ndarray:
    parts, index = _lattice(n)
    Q = np.zeros((len(parts), len(parts)))
    for i, p in enumerate(parts):
        b = len(p)
        for k in range(2, b + 1):
            rate = lambda_rate(measure, b, k)
            if rate == 0:
                continue
            for idx in itertools.combinations(range(b), k):
                Q[i, index[_subset_merge(p, idx)]] += rate
        Q[i, i] = -Q[i].sum()
    return Q


@lru_cache(maxsize=64)
def xi_generator(measure: XiSweepMeasure, n: int) -> np.ndarray:
    parts, index = _lattice(n)
    Q = np.zeros((len(parts), len(parts)))
    marks = measure.marks()
    for i, p in enumerate(parts):
        b = len(p)
        if b == 1:
            continue
        for idx in itertools.combinations(range(b), 2):
            Q[i, index[_subset_merge(p, idx)]] += 1.0
        for rate, s, theta, m in marks:
            law = stick_breaking_law(theta, m, b)
            for q, w in law.weights.items():
                if q.is_singletons():
                    continue
                Q[i, index[coagulate(p, q)]] += rate * s * w
        Q[i, i] = 0.0
        Q[i, i] = -Q[i].sum()
    return Q


def _law_at(Q: np.ndarray, n: int, t: float) -> PartitionDistribution:
    parts, index = _lattice(n)
    row = expm(Q * t)[index[Partition.singletons(n)]]
    row = np.clip(row, 0.0, None)
    row /= row.sum()
    return PartitionDistribution(n, {p: float(w) for p, w in zip(parts, row) if w > 0})


def lambda_law(measure: LambdaMeasure, n: int, t: float) -> PartitionDistribution:
    """Exact law of the Lambda-coalescent state at time t (matrix exponential)."""
    return _law_at(lambda_generator(measure, n), n, t)


def xi_law(measure: XiSweepMeasure, n: int, t: float) -> PartitionDistribution:
    """Exact law of the sweep Xi-coalescent state at time t."""
    return _law_at(xi_generator(measure, n), n, t)


def kingman_law(n: int, t: float) -> PartitionDistribution:
    return lambda_law(LambdaMeasure.kingman_only(), n, t)

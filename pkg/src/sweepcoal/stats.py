"""Mutations on genealogies, sample statistics, and the exact expectations
(segregating sites, pairwise differences, rho, coupling identity)."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .coalescent import (
    CoalescentEnsemble,
    GenealogyPath,
    XiSweepMeasure,
    coalescent_ensemble,
    coupled_ensemble,
)
from .ensemble import Estimate, master_from
from .errors import DivergenceError, DomainError, IncompleteTreeError, UnsupportedMeasureError
from .measures import LambdaMeasure, alpha_sequence, jump_row, total_rates
from .partitions import enumerate_partitions, stick_breaking_law


def harmonic(m: int) -> float:
    return math.fsum(1.0 / i for i in range(1, m + 1))


# --------------------------------------------------------------------------
# mutations and sample statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MutatedGenealogy:
    """Branch lengths and mutation counts grouped by the number of leaves below.

    ``lengths[k-1]`` and ``counts[k-1]`` refer to branches subtending k leaves;
    k = 1 are the external branches.
    """

    n: int
    lengths: np.ndarray
    counts: np.ndarray
    truncated: bool = False


@dataclass(frozen=True)
class SampleStats:
    n: int
    segregating: int
    pairwise: float
    eta_e: int
    eta_i: int
    j: float = math.nan
    i: float = math.nan


def overlay_mutations(path: GenealogyPath, theta: float, rng: np.random.Generator,
                      allow_truncated: bool = False) -> MutatedGenealogy:
    """Poisson(theta/2 * length) mutations on every branch."""
    if theta < 0:
        raise DomainError(f"theta={theta} < 0")
    if not path.absorbed and not allow_truncated:
        raise IncompleteTreeError("genealogy was truncated before its root; pass allow_truncated=True")
    counts = rng.poisson(0.5 * theta * path.lengths)
    return MutatedGenealogy(path.n, path.lengths.copy(), counts, not path.absorbed)


def _pair_weights(n: int) -> np.ndarray:
    """A mutation below k leaves separates k(n-k) of the C(n,2) pairs."""
    k = np.arange(1, n)
    return k * (n - k) / (n * (n - 1) / 2)


def sample_statistics(g: MutatedGenealogy) -> SampleStats:
    n = g.n
    if n < 2:
        return SampleStats(n, 0, 0.0, 0, 0, 0.0, 0.0)
    c = g.counts
    S = int(c.sum())
    ee = int(c[0])
    return SampleStats(n, S, float(c @ _pair_weights(n)), ee, S - ee,
                       float(g.lengths[0]), float(g.lengths[1:].sum()))


@dataclass(frozen=True)
class StatsTable:
    """Per-replicate statistics of an ensemble, as columns."""

    n: int
    theta: float
    segregating: np.ndarray
    pairwise: np.ndarray
    eta_e: np.ndarray
    eta_i: np.ndarray
    j: np.ndarray
    i: np.ndarray

    @property
    def reps(self) -> int:
        return self.segregating.size

    @property
    def tajima_numerator(self) -> np.ndarray:
        return self.pairwise - self.segregating / harmonic(self.n - 1)

    @property
    def fuli_numerator(self) -> np.ndarray:
        return self.segregating - harmonic(self.n - 1) * self.eta_e


def stats_from_lengths(lengths: np.ndarray, theta: float, rng: np.random.Generator) -> StatsTable:
    reps, m = lengths.shape
    n = m + 1
    counts = rng.poisson(0.5 * theta * lengths)
    S = counts.sum(axis=1)
    return StatsTable(n, theta, S, counts @ _pair_weights(n), counts[:, 0], S - counts[:, 0],
                      lengths[:, 0].copy(), lengths[:, 1:].sum(axis=1))


def stats_ensemble(measure: LambdaMeasure | XiSweepMeasure, n: int, theta: float, reps: int,
                   seed: int, threads: int | None = None) -> StatsTable:
    """Genealogies from the replicate seeds; mutations from a generator keyed on the run seed
    and laid down in replicate order, so thread count never changes the result."""
    ens = coalescent_ensemble(measure, n, reps, seed, threads=threads)
    return stats_from_lengths(ens.lengths, theta, np.random.default_rng([seed, 1]))


# --------------------------------------------------------------------------
# D statistics
# --------------------------------------------------------------------------

def tajima_constants(n: int) -> tuple[float, float]:
    """(e1, e2) of the classical Tajima normalization: Var = e1*S + e2*S*(S-1)."""
    a1 = harmonic(n - 1)
    a2 = math.fsum(1.0 / i**2 for i in range(1, n))
    b1 = (n + 1) / (3.0 * (n - 1))
    b2 = 2.0 * (n * n + n + 3) / (9.0 * n * (n - 1))
    c1 = b1 - 1.0 / a1
    c2 = b2 - (n + 2) / (a1 * n) + a2 / a1**2
    return c1 / a1, c2 / (a1**2 + a2)


def fuli_constants(n: int) -> tuple[float, float]:
    """(u_D, v_D) of the Fu-Li with-outgroup normalization: Var = u_D*S + v_D*S^2."""
    an = harmonic(n - 1)
    bn = math.fsum(1.0 / i**2 for i in range(1, n))
    cn = 2.0 * (n * an - 2.0 * (n - 1)) / ((n - 1) * (n - 2))
    vd = 1.0 + an**2 / (bn + an**2) * (cn - (n + 1.0) / (n - 1.0))
    ud = an - 1.0 - vd
    return ud, vd


@dataclass(frozen=True)
class DStatConfig:
    theta: float
    normalization: str = "numerator-only"
    tajima: Callable[[int], tuple[float, float]] = tajima_constants
    fuli: Callable[[int], tuple[float, float]] = fuli_constants

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError(f"theta={self.theta} must be > 0")
        if self.normalization not in ("numerator-only", "classical"):
            raise DomainError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class DStats:
    tajima_numerator: float
    tajima_d: float | None
    fuli_numerator: float
    fuli_d: float | None


def d_statistics(st: SampleStats, config: DStatConfig) -> DStats:
    h = harmonic(st.n - 1)
    tn = st.pairwise - st.segregating / h
    fn = st.segregating - h * st.eta_e
    if config.normalization == "numerator-only":
        return DStats(tn, None, fn, None)
    if st.n < 4:
        raise DomainError("classical normalization needs n >= 4")
    S = st.segregating
    if S == 0:
        return DStats(tn, None, fn, None)
    e1, e2 = config.tajima(st.n)
    ud, vd = config.fuli(st.n)
    return DStats(tn, tn / math.sqrt(e1 * S + e2 * S * (S - 1)),
                  fn, fn / math.sqrt(ud * S + vd * S * S))


# --------------------------------------------------------------------------
# exact expectations
# --------------------------------------------------------------------------

XI_EXACT_MAX_N = 8


def _xi_block_rates(measure: XiSweepMeasure, b: int) -> np.ndarray:
    """Rates from b blocks to b' = 1..b-1 blocks (index b'-1)."""
    if b > XI_EXACT_MAX_N:
        raise DomainError(f"exact Xi jump law is limited to {XI_EXACT_MAX_N} blocks")
    out = np.zeros(b - 1)
    out[b - 2] += b * (b - 1) / 2.0
    for rate, s, theta, m in measure.marks():
        for q, w in stick_breaking_law(theta, m, b).weights.items():
            if len(q) < b:
                out[len(q) - 1] += rate * s * w
    return out


def _landing_rates(measure, m: int) -> np.ndarray:
    """Rates from m blocks to m-1, m-2, ..., 1 blocks (index j -> m-1-j)."""
    if isinstance(measure, XiSweepMeasure):
        return _xi_block_rates(measure, m)[::-1]
    return jump_row(measure, m)  # k-merger lands at m-k+1


def gn_table(measure: LambdaMeasure | XiSweepMeasure, n: int) -> np.ndarray:
    """G_n(b) for b = 0..n (entries 0 and 1 unused except G_n(1) = 1)."""
    v = np.zeros(n + 1)
    v[n] = 1.0
    for m in range(n, 1, -1):
        if v[m] == 0.0:
            continue
        row = _landing_rates(measure, m)
        tot = row.sum()
        if tot <= 0:
            raise UnsupportedMeasureError(f"no mergers from {m} blocks")
        v[m - 1 : 0 : -1] += v[m] * row / tot
    return v


def gnb(measure: LambdaMeasure | XiSweepMeasure, n: int, b: int) -> float:
    """Probability that the coalescent started from n blocks ever has exactly b blocks."""
    if b < 2 or b > n:
        raise DomainError(f"need 2 <= b <= n, got b={b}, n={n}")
    return float(gn_table(measure, n)[b])


def total_rate(measure: LambdaMeasure | XiSweepMeasure, b: int) -> float:
    if isinstance(measure, XiSweepMeasure):
        return float(_xi_block_rates(measure, b).sum())
    return total_rates(measure, b)[0]


def expected_pairwise(measure: LambdaMeasure, theta: float) -> float:
    return theta / measure.total_mass


def expected_segregating(measure: LambdaMeasure | XiSweepMeasure, theta: float, n: int) -> float:
    if n < 2:
        raise DomainError("n must be >= 2")
    G = gn_table(measure, n)
    return 0.5 * theta * math.fsum(b * G[b] / total_rate(measure, b) for b in range(2, n + 1))


# -- rho -------------------------------------------------------------------

@dataclass(frozen=True)
class RhoResult:
    rho: float
    truncation_bound: float
    level: int
    components: dict


def _alpha_majorant(measure: LambdaMeasure) -> tuple[float, float]:
    """(H, c) with alpha_b <= H + c(1 + log b) for all b.

    Components with finite eta contribute their eta mass to H; linear densities
    reaching 0 contribute their slope to c. Anything else fails the summability
    condition sum alpha_b log b / b^2 < infinity and is refused.
    """
    if measure.kingman != 1.0:
        raise UnsupportedMeasureError(
            f"rho is defined for delta_0 + Lambda_0; kingman mass is {measure.kingman}"
        )
    H = math.fsum(w / (p * p) for p, w in measure.atoms)
    c = 0.0
    for d in measure.densities:
        if d.c == 0:
            continue
        if math.isfinite(d.eta_mass):
            H += d.eta_mass
        elif d.form == "linear":
            c += d.c
        else:
            raise DivergenceError(
                "summability condition sum_b alpha_b log(b) / b^2 < inf fails: a constant "
                f"density {d.c} on [0, {d.hi}] gives alpha_b growing linearly in b"
            )
    return H, c


def _tail_integral(f, B: float) -> float:
    v, _ = integrate.quad(f, B, math.inf, epsabs=1e-14, epsrel=1e-10, limit=200)
    return v


def _rho_at(measure: LambdaMeasure, theta: float, B: int, H: float, c: float) -> tuple[float, float, dict]:
    b = np.arange(2, B + 1, dtype=float)
    alpha = alpha_sequence(measure, B)
    pairs = b * (b - 1) / 2
    lam = pairs + alpha
    first = 0.5 * theta * math.fsum(b * alpha / (pairs * lam))
    G = gn_table(measure, B)[2:]
    second = 0.5 * theta * math.fsum(b / lam * (1.0 - G))

    def A(x):
        return H + c * (1.0 + math.log(x))

    # sum_{b>B} b alpha_b / (C(b,2) lambda_b) <= sum 4 A(b) / (b (b-1)^2)
    tail1 = 0.5 * theta * _tail_integral(lambda x: 4 * A(x) / (x * (x - 1) ** 2), B)

    # 1 - G_inf(b) <= R(b) := sum_{m>=b} alpha_{m+1}/lambda_{m+1} <= sum 2 A(m+1)/(m(m+1))
    def R(x):
        # f(x) + integral_x^inf f for f(y) = 2 A(y+1) / (y (y+1)), using
        # log(y+1)/(y(y+1)) <= (log y + 1/y) / y^2
        return (2 * A(x + 1) / (x * (x + 1)) + 2 * (H + c) * math.log1p(1 / x)
                + 2 * c * ((math.log(x) + 1) / x + 0.5 / x**2))

    tail2 = 0.5 * theta * _tail_integral(lambda x: 2.0 / (x - 1) * R(x), B)

    # |G_B(b) - G_inf(b)| <= sum_{m>=B} alpha_{m+1}/lambda_{m+1}, uniformly in b <= B
    ext = 8 * B
    a_ext = alpha_sequence(measure, ext + 1)[B - 1 :]  # alpha_{B+1} .. alpha_{ext+1}
    mm = np.arange(B + 1, ext + 2, dtype=float)
    cauchy_sum = math.fsum(a_ext / (mm * (mm - 1) / 2 + a_ext)) + R(float(ext + 1))
    cauchy = 0.5 * theta * math.fsum(b / lam) * cauchy_sum
    comps = {"pair_rate_term": first, "missed_visit_term": second,
             "tail_pair_rate": tail1, "tail_missed_visit": tail2, "visit_limit": cauchy}
    return first + second, tail1 + tail2 + cauchy, comps


def rho(measure: LambdaMeasure, theta: float, tol: float = 5e-3, *,
        start: int = 64, max_level: int = 2**14) -> RhoResult:
    """Limiting deficit rho of E[S_n] below theta*h_{n-1}, with a rigorous truncation bound.

    The level B doubles until the bound drops below ``tol`` or ``max_level`` is hit;
    in the latter case a warning is issued and the larger bound is reported.
    """
    H, c = _alpha_majorant(measure)
    if theta == 0 or (H == 0 and c == 0):
        return RhoResult(0.0, 0.0, 0, {})
    B = start
    while True:
        value, bound, comps = _rho_at(measure, theta, B, H, c)
        if bound < tol or B >= max_level:
            break
        B *= 2
    if bound >= tol:
        warnings.warn(f"rho truncation bound {bound:.3g} exceeds tol {tol:.3g} at level {B}",
                      RuntimeWarning, stacklevel=2)
    return RhoResult(value, bound, B, comps)


# -- coupling and external branches ---------------------------------------

def coupling_identity_probability(measure: LambdaMeasure, n: int) -> float:
    """prod_{b=2}^{n} (1 - alpha_b / lambda_b)."""
    if measure.kingman != 1.0:
        raise UnsupportedMeasureError("identity probability is defined for kingman mass 1")
    out = 1.0
    for b in range(2, n + 1):
        lam, al = total_rates(measure, b)
        assert al < lam
        out *= 1.0 - al / lam
    return out


def coupling_lower_bound(measure: LambdaMeasure) -> float:
    """prod over b of (1 - alpha_b/lambda_b), using 6 alpha_b/(b(b-1)) past the point where it is <= 1.

    For b >= b0 with 6 alpha_b/[b(b-1)] <= 1, 1 - alpha_b/lambda_b >= 1 - 2 alpha_b/(b(b-1))
    >= exp(-6 alpha_b/(b(b-1))), so the infinite product is bounded below by the finite
    product up to b0 times exp(-6 sum_{b>=b0} alpha_b/(b(b-1))).
    """
    H, c = _alpha_majorant(measure)
    out = 1.0
    b = 2
    while True:
        lam, al = total_rates(measure, b)
        if 6 * al / (b * (b - 1)) <= 1 and 6 * (H + c * (1 + math.log(b))) / (b * (b - 1)) <= 1:
            break
        out *= 1.0 - al / lam
        b += 1
    tail = math.fsum(alpha_sequence(measure, 4 * b)[b - 2 :] / (np.arange(b, 4 * b + 1) * np.arange(b - 1, 4 * b)))
    tail += _tail_integral(lambda x: (H + c * (1 + math.log(x))) / (x * (x - 1)), 4 * b)
    return out * math.exp(-6 * tail)


@dataclass(frozen=True)
class DeficitEstimate:
    """E[2 - J_n] estimated two ways from coupled runs.

    ``plain`` averages 2 - J_n. ``controlled`` averages J_n(Kingman) - J_n(Lambda)
    over paths sharing their pair points; it is unbiased because E[J_n] = 2
    under Kingman, and has much smaller variance.
    """

    n: int
    plain: Estimate
    controlled: Estimate
    kingman_mean: Estimate


def external_branch_deficit(measure: LambdaMeasure, n: int, reps: int, rng: np.random.Generator,
                            threads: int | None = None) -> DeficitEstimate:
    ens = coupled_ensemble(measure, n, reps, master_from(rng), threads)
    return DeficitEstimate(n, Estimate.of(2.0 - ens.j_lambda),
                           Estimate.of(ens.j_kingman - ens.j_lambda), Estimate.of(ens.j_kingman))


def visit_frequencies(ens: CoalescentEnsemble) -> np.ndarray:
    return ens.visited.mean(axis=0)

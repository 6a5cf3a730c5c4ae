"""Forward Moran model with one selected site and one linked neutral site.

Population of 2N chromosomes; every chromosome dies at rate 1. A replacement
proposal picks a dying index and a selected-site parent uniformly. The
proposal is rejected with probability s when the dying chromosome carries B
and the parent carries b (the decision looks at selected-site alleles only).
With probability r the neutral site is copied from a second, independent
uniform parent.

Raw times here are in population units; coalescent time is raw time / N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .ensemble import Estimate, fan_out, master_from, replicate_seeds
from .errors import DomainError, ResourceError
from .partitions import Partition
from .sweepspec import SweepSpec

MAX_TWO_N = 4000
MAX_HORIZON = 5.0


@dataclass(frozen=True)
class SweepParams:
    two_n: int
    s: float
    r: float
    n: int

    def __post_init__(self):
        if int(self.two_n) != self.two_n or self.two_n < 2:
            raise DomainError(f"twoN={self.two_n} must be an integer >= 2")
        if not 0 < self.s < 1:
            raise DomainError(f"s={self.s} outside (0, 1)")
        if not 0 <= self.r <= 1:
            raise DomainError(f"r={self.r} outside [0, 1]")
        if int(self.n) != self.n or not 1 <= self.n <= self.two_n:
            raise DomainError(f"n={self.n} outside [1, twoN]")

    @property
    def log_n(self) -> float:
        return math.log(self.two_n / 2)

    @property
    def duration_bound(self) -> float:
        """4(log N + 1)."""
        return 4.0 * (self.log_n + 1.0)

    @property
    def alpha(self) -> float:
        return self.r * math.log(self.two_n) / self.s


@dataclass(frozen=True)
class SweepOutcome:
    fixed: bool
    tau: float
    theta: Partition


@dataclass
class EventLog:
    """Replacement events of one sweep; indices are 0-based."""

    time: np.ndarray
    dying: np.ndarray
    sel_parent: np.ndarray
    recombined: np.ndarray
    neu_parent: np.ndarray
    accepted: np.ndarray
    dying_allele: np.ndarray
    parent_allele: np.ndarray
    x_after: np.ndarray
    two_n: int

    def __len__(self) -> int:
        return self.time.size


@dataclass(frozen=True)
class SweepEnsemble:
    params: SweepParams
    fixed: np.ndarray
    tau: np.ndarray
    rgs: np.ndarray
    ups: np.ndarray
    downs: np.ndarray

    @property
    def reps(self) -> int:
        return self.fixed.size

    def partitions(self, mask: np.ndarray | None = None) -> list[Partition]:
        rows = self.rgs if mask is None else self.rgs[mask]
        return [Partition.from_rgs(r) for r in rows]


def hitting_probability(i: int, j: int, k: int, s: float) -> float:
    """P(an up-probability 1/(2-s) walk from k hits j before i)."""
    if not (0 <= i <= k <= j and i < j):
        raise DomainError(f"need 0 <= i <= k <= j and i < j, got i={i}, j={j}, k={k}")
    if not 0 < s < 1:
        raise DomainError(f"s={s} outside (0, 1)")
    lq = math.log1p(-s)
    # (1 - q^(k-i)) / (1 - q^(j-i)) with q^m = exp(m log q); expm1 keeps small s accurate
    num = -math.expm1((k - i) * lq)
    den = -math.expm1((j - i) * lq)
    return num / den


def fixation_probability(two_n: int, s: float) -> float:
    return hitting_probability(0, two_n, 1, s)


def _seed32(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**32))


def simulate_single_sweep(params: SweepParams, rng: np.random.Generator) -> SweepOutcome:
    ens = simulate_sweeps(params, 1, master_from(rng), threads=1)
    return SweepOutcome(bool(ens.fixed[0]), float(ens.tau[0]), Partition.from_rgs(ens.rgs[0]))


def simulate_sweeps(params: SweepParams, reps: int, seed: int, threads: int | None = None) -> SweepEnsemble:
    n = params.n
    fixed = np.zeros(reps, np.bool_)
    tau = np.zeros(reps)
    rgs = np.zeros((reps, n), np.int64)
    ups = np.zeros(reps, np.int64)
    downs = np.zeros(reps, np.int64)

    def work(a, b):
        K.sweep_batch(replicate_seeds(seed, a, b), params.two_n, params.s, params.r, n,
                      fixed[a:b], tau[a:b], rgs[a:b], ups[a:b], downs[a:b])

    fan_out(work, reps, threads)
    return SweepEnsemble(params, fixed, tau, rgs, ups, downs)


def simulate_sweep_logged(params: SweepParams, rng: np.random.Generator) -> tuple[SweepOutcome, EventLog]:
    """Slow reference path: keep every event, then trace the sample backward."""
    two_n, s, r = params.two_n, params.s, params.r
    allele = np.zeros(two_n, np.int8)
    allele[0] = 1
    x, t = 1, 0.0
    rows = []
    while 0 < x < two_n:
        t += rng.exponential(1.0 / two_n)
        d = int(rng.integers(two_n))
        ps = int(rng.integers(two_n))
        ad, ap = int(allele[d]), int(allele[ps])
        if ad == 1 and ap == 0 and rng.random() < s:
            rows.append((t, d, ps, False, ps, False, ad, ap, x))
            continue
        rec = r > 0 and rng.random() < r
        pn = int(rng.integers(two_n)) if rec else ps
        allele[d] = ap
        x += ap - ad
        rows.append((t, d, ps, rec, pn, True, ad, ap, x))
    cols = list(zip(*rows))
    log = EventLog(
        time=np.array(cols[0]), dying=np.array(cols[1], np.int64),
        sel_parent=np.array(cols[2], np.int64), recombined=np.array(cols[3], np.bool_),
        neu_parent=np.array(cols[4], np.int64), accepted=np.array(cols[5], np.bool_),
        dying_allele=np.array(cols[6], np.int8), parent_allele=np.array(cols[7], np.int8),
        x_after=np.array(cols[8], np.int64), two_n=two_n,
    )
    sample = rng.choice(two_n, size=params.n, replace=False)
    anc = trace_backward(log, sample)
    theta = Partition.from_rgs(_rgs_of(anc))
    return SweepOutcome(x == two_n, float(t), theta), log


def _rgs_of(vals: Sequence[int]) -> list[int]:
    ids: dict[int, int] = {}
    return [ids.setdefault(int(v), len(ids)) for v in vals]


def trace_backward(log: EventLog, positions: Sequence[int]) -> np.ndarray:
    """Time-0 neutral-site ancestor of each given individual at the end of the log."""
    pos = np.array(positions, dtype=np.int64)
    acc = np.flatnonzero(log.accepted)
    for e in acc[::-1]:
        pos[pos == log.dying[e]] = log.neu_parent[e]
    assert ((pos >= 0) & (pos < log.two_n)).all()
    return pos


def replay_labels(log: EventLog) -> np.ndarray:
    """Forward propagation of time-0 labels along the log (what the fast kernel does)."""
    label = np.arange(log.two_n)
    for e in np.flatnonzero(log.accepted):
        label[log.dying[e]] = label[log.neu_parent[e]]
    return label


def sweep_duration_mean(params: SweepParams, reps: int, rng: np.random.Generator,
                        threads: int | None = None) -> Estimate:
    if reps < 1000:
        raise DomainError(f"reps={reps} < 1000")
    return Estimate.of(simulate_sweeps(params, reps, master_from(rng), threads).tau)


def coalescence_on_loss(ens: SweepEnsemble) -> Estimate:
    hit = (~ens.fixed) & (ens.rgs.max(axis=1) < ens.params.n - 1)
    return Estimate.proportion(int(hit.sum()), ens.reps)


def prob_coalescence_given_loss(params: SweepParams, reps: int, rng: np.random.Generator,
                                threads: int | None = None) -> Estimate:
    """Frequency of {lost and the sample partition is not all singletons}."""
    return coalescence_on_loss(simulate_sweeps(params, reps, master_from(rng), threads))


# --------------------------------------------------------------------------
# recurrent sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AncestralSnapshot:
    times: tuple[float, ...]
    partitions: tuple[Partition, ...]
    flagged: bool = False
    sweeps: int = 0
    fixations: int = 0


@dataclass
class _Segment:
    start: float
    end: float
    cps: np.ndarray
    labels: np.ndarray = field(repr=False)


def _check_recurrent(spec: SweepSpec, two_n: int, n: int, times: Sequence[float]) -> None:
    if int(two_n) != two_n or two_n < 2:
        raise DomainError(f"twoN={two_n} must be an integer >= 2")
    if not 1 <= n <= two_n:
        raise DomainError(f"n={n} outside [1, twoN]")
    if any(u < 0 for u in times) or not times:
        raise DomainError("times must be a nonempty list of values >= 0")
    if two_n > MAX_TWO_N:
        raise ResourceError(
            f"twoN={two_n} exceeds the budget of {MAX_TWO_N}; "
            "compare against the coalescent samplers for larger populations"
        )
    if max(times) > MAX_HORIZON:
        raise ResourceError(f"largest time {max(times)} exceeds {MAX_HORIZON}; shorten the window")


def simulate_recurrent(spec: SweepSpec, two_n: int, n: int, times: Sequence[float],
                       rng: np.random.Generator) -> AncestralSnapshot:
    """Ancestral partitions of an n-sample taken at time 0, at coalescent times ``times``."""
    _check_recurrent(spec, two_n, n, times)
    K.seed(_seed32(rng))
    N = two_n / 2.0
    log2n = math.log(two_n)
    buf = 10.0 * log2n
    u_max = max(times)
    w0 = -N * u_max - buf
    raw_cps = np.array(sorted({-N * u for u in times if u > 0}))

    rates = np.array([a.rate for a in spec.atoms], dtype=float)
    total = float(rates.sum()) if rates.size else 0.0
    segments: list[_Segment] = []
    flagged = False
    fixations = 0
    if total > 0:
        cum = np.cumsum(rates)
        s_arr = np.array([a.s for a in spec.atoms])
        rn_arr = np.array([min(1.0, spec.r(a.x) / log2n) for a in spec.atoms])
        rate_raw = total / N

        def pick():
            c = int(np.searchsorted(cum, rng.random() * total, side="right"))
            return min(c, len(cum) - 1)

        # pre-window: only to learn whether a sweep would straddle w0
        t = w0 - buf
        busy = -math.inf
        while True:
            t += rng.exponential(1.0 / rate_raw)
            if t >= w0:
                break
            if t < busy:
                continue
            busy = K.sweep_duration(two_n, s_arr[pick()], t, w0)
            if busy >= w0:
                flagged = True
        t = w0
        busy = -math.inf
        while True:
            t += rng.exponential(1.0 / rate_raw)
            if t >= 0.0:
                break
            if t < busy:
                continue
            c = pick()
            cps = raw_cps[(raw_cps > t)]
            labels = np.empty((cps.size + 1, two_n), np.int64)
            end, fixed, pieces = K.sweep_segment(two_n, s_arr[c], rn_arr[c], t, 0.0, cps, labels)
            segments.append(_Segment(t, end, cps[: pieces - 1], labels[:pieces]))
            fixations += int(fixed)
            busy = end

    parts = _trace_recurrent(segments, n, two_n, times, rng)
    return AncestralSnapshot(tuple(times), tuple(parts), flagged, len(segments), fixations)


class _Lineages:
    def __init__(self, n: int):
        self.n = n
        self.of = np.arange(n)  # element -> lineage
        self.b = n

    def merge_pair(self, i: int, j: int):
        lo, hi = min(i, j), max(i, j)
        self.of[self.of == hi] = lo
        self.of[self.of > hi] -= 1
        self.b -= 1

    def merge_by_key(self, keys: np.ndarray) -> np.ndarray:
        """Merge lineages with equal keys; returns the keys of the survivors."""
        uniq, inv = np.unique(keys, return_inverse=True)
        # keep lineage order by first appearance for stable bookkeeping
        first = {}
        for idx, k in enumerate(inv):
            first.setdefault(int(k), len(first))
        remap = np.array([first[int(k)] for k in inv])
        self.of = remap[self.of]
        self.b = len(first)
        out = np.empty(self.b, dtype=keys.dtype)
        for idx, k in enumerate(inv):
            out[first[int(k)]] = uniq[k]
        return out

    def partition(self) -> Partition:
        return Partition.from_rgs(self.of)


def _trace_recurrent(segments: list[_Segment], n: int, two_n: int, times: Sequence[float],
                     rng: np.random.Generator) -> list[Partition]:
    N = two_n / 2.0
    want: dict[float, list[int]] = {}
    out: list[Partition | None] = [None] * len(times)
    for i, u in enumerate(times):
        if u == 0:
            out[i] = Partition.singletons(n)
        else:
            want.setdefault(-N * u, []).append(i)
    pending = sorted(want, reverse=True)  # raw times, latest first
    lin = _Lineages(n)

    def record(c: float):
        p = lin.partition()
        for i in want[c]:
            out[i] = p

    def neutral(t_hi: float, t_lo: float):
        """Backward through a stretch with no active sweep (pairs merge at rate 1/N)."""
        t = t_hi
        while pending:
            floor = max(pending[0], t_lo)
            if lin.b > 1:
                cand = t - rng.exponential(2.0 * N / (lin.b * (lin.b - 1)))
                if cand > floor:
                    t = cand
                    i, j = rng.choice(lin.b, size=2, replace=False)
                    lin.merge_pair(int(i), int(j))
                    continue
            if pending[0] < t_lo:
                return
            t = pending.pop(0)
            record(t)

    t = 0.0
    for seg in reversed(segments):
        if not pending:
            break
        neutral(t, seg.end)
        if not pending:
            break
        pos = rng.choice(two_n, size=lin.b, replace=False)
        for j in range(seg.labels.shape[0] - 1, -1, -1):
            pos = lin.merge_by_key(seg.labels[j][pos])
            if j > 0:
                c = float(seg.cps[j - 1])
                while pending and pending[0] >= c:
                    record(pending.pop(0))
        t = seg.start
    if pending:
        neutral(t, -math.inf)
    assert all(p is not None for p in out)
    return out  # type: ignore[return-value]


def simulate_recurrent_ensemble(spec: SweepSpec, two_n: int, n: int, times: Sequence[float],
                                reps: int, seed: int, threads: int | None = None):
    """Per-replicate snapshots; replicate i uses its own generator seeded from the run seed."""
    _check_recurrent(spec, two_n, n, times)
    out: list[AncestralSnapshot | None] = [None] * reps

    def work(a, b):
        for i, sd in zip(range(a, b), replicate_seeds(seed, a, b)):
            out[i] = simulate_recurrent(spec, two_n, n, times, np.random.default_rng(int(sd)))

    fan_out(work, reps, threads)
    return out

"""Brute-force reference computations, written independently of the package."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import integrate


def set_partitions(n: int) -> list[tuple[tuple[int, ...], ...]]:
    """All partitions of {1..n} as sorted tuples of sorted blocks."""
    def rec(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for p in rec(rest):
            yield [(first,)] + p
            for i in range(len(p)):
                yield p[:i] + [(first,) + p[i]] + p[i + 1:]
    return sorted(tuple(sorted(tuple(sorted(b)) for b in p)) for p in rec(list(range(1, n + 1))))


def bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def two_coin_oracle(p: float, n: int) -> dict[tuple, float]:
    out: dict[tuple, float] = {}
    for heads in itertools.product((0, 1), repeat=n):
        k = sum(heads)
        w = p**k * (1 - p) ** (n - k)
        merged = tuple(i + 1 for i, h in enumerate(heads) if h)
        blocks = [(i + 1,) for i, h in enumerate(heads) if not h]
        if merged:
            blocks.append(merged)
        key = tuple(sorted(blocks))
        out[key] = out.get(key, 0.0) + w
    return out


def paintbox_prob(y, blocks) -> float:
    """P(paintbox with boxes y, no dust, gives exactly these blocks)."""
    total = 0.0
    for boxes in itertools.permutations(range(len(y)), len(blocks)):
        total += math.prod(y[j] ** len(b) for j, b in zip(boxes, blocks))
    return total


def stick_oracle(theta: float, m: int, blocks) -> float:
    """Q_{R(theta,m),n}(blocks) by quadrature over the break variables (m <= 3)."""
    assert 1 <= m <= 3
    if m == 1:
        return 1.0 if len(blocks) == 1 else 0.0

    def frags(ws, zs):
        v = [w if z else 0.0 for w, z in zip(ws, zs)]   # V_2..V_m
        out = []
        for k in range(len(v)):
            out.append(v[k] * math.prod(1 - x for x in v[k + 1:]))
        out.append(math.prod(1 - x for x in v))
        return out

    total = 0.0
    for zs in itertools.product((0, 1), repeat=m - 1):
        pz = math.prod(theta if z else 1 - theta for z in zs)
        if pz == 0:
            continue
        if m == 2:
            val, _ = integrate.quad(lambda w: paintbox_prob(frags([w], zs), blocks), 0, 1)
        else:
            # W_2 ~ Beta(1,1), W_3 ~ Beta(1,2) with density 2(1-w)
            val, _ = integrate.dblquad(
                lambda w3, w2: 2 * (1 - w3) * paintbox_prob(frags([w2, w3], zs), blocks),
                0, 1, 0, 1)
        total += pz * val
    return total


def lambda_rate_oracle(kingman: float, atoms, b: int, k: int, density=None) -> float:
    """lambda_{b,k} = a 1{k=2} + int x^{k-2}(1-x)^{b-k} Lambda_0(dx)."""
    r = kingman if k == 2 else 0.0
    r += sum(w * p ** (k - 2) * (1 - p) ** (b - k) for p, w in atoms)
    if density is not None:
        h, lo, hi = density
        r += integrate.quad(lambda x: x ** (k - 2) * (1 - x) ** (b - k) * h(x), lo, hi,
                            epsabs=1e-13, epsrel=1e-12)[0]
    return r


def star_visit(n: int, b: int) -> Fraction:
    """G_n(b) for Lambda = delta_0 + delta_1 by first-step analysis in exact arithmetic."""
    @__import__("functools").lru_cache(None)
    def g(m):
        if m == b:
            return Fraction(1)
        if m < b:
            return Fraction(0)
        pair = Fraction(m * (m - 1), 2)
        tot = pair + 1  # delta_1 merges everything at rate 1
        return pair / tot * g(m - 1) + (Fraction(1) / tot) * (1 if b == 1 else 0)
    return g(n)


def gamblers_ruin(i: int, j: int, k: int, up: float) -> float:
    """Hitting probability of j before i from k by a linear solve."""
    m = j - i + 1
    A = np.zeros((m, m))
    rhs = np.zeros(m)
    A[0, 0] = 1.0
    A[-1, -1] = 1.0
    rhs[-1] = 1.0
    for x in range(1, m - 1):
        A[x, x] = 1.0
        A[x, x + 1] = -up
        A[x, x - 1] = -(1 - up)
    return float(np.linalg.solve(A, rhs)[k - i])


def kingman3_law(t: float) -> dict[int, float]:
    """Law of the block count of Kingman's coalescent from 3 lineages."""
    p3 = math.exp(-3 * t)
    p2 = 1.5 * (math.exp(-t) - math.exp(-3 * t))
    return {3: p3, 2: p2, 1: 1 - p3 - p2}

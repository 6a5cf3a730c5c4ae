"""Finite measures Lambda = a*delta_0 + Lambda_0 on [0, 1] and their merger rates.

Lambda_0 is a sum of point masses and piecewise densities. Two density forms
are native: ``linear`` (h(y) = c*y) and ``constant`` (h(y) = c); a ``table``
of piecewise-constant values is accepted on input and expanded to constants.
Everything the samplers need is phrased through eta(dx) = x^-2 Lambda_0(dx).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
from scipy import integrate, special, stats

from .errors import DomainError, UnsupportedMeasureError, ValidationError
from .sweepspec import SweepSpec

FORMS = ("linear", "constant")


@dataclass(frozen=True)
class Density:
    form: str
    c: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValidationError("form", f"unknown form {self.form!r}")
        if not (0 <= self.lo < self.hi <= 1):
            raise ValidationError("lo", f"need 0 <= lo < hi <= 1, got [{self.lo}, {self.hi}]")
        if not (math.isfinite(self.c) and self.c >= 0):
            raise ValidationError("c", f"must be finite and >= 0, got {self.c!r}")

    def h(self, x):
        x = np.asarray(x, dtype=float)
        base = self.c * x if self.form == "linear" else np.full_like(x, self.c)
        return np.where((x >= self.lo) & (x <= self.hi), base, 0.0)

    @property
    def mass(self) -> float:
        if self.form == "linear":
            return 0.5 * self.c * (self.hi**2 - self.lo**2)
        return self.c * (self.hi - self.lo)

    @property
    def eta_mass(self) -> float:
        if self.c == 0:
            return 0.0
        if self.lo == 0:
            return math.inf
        if self.form == "linear":
            return self.c * math.log(self.hi / self.lo)
        return self.c * (1.0 / self.lo - 1.0 / self.hi)

    def jump_row(self, m: int) -> np.ndarray:
        """C(m,k) * lambda_{m,k} contribution for k = 2..m."""
        k = np.arange(2, m + 1)
        if self.form == "linear":
            # C(m,k) B(k, m-k+1) = 1/k and I_x(k, m-k+1) = P(Bin(m, x) >= k)
            d = stats.binom.sf(k - 1, m, self.hi) - stats.binom.sf(k - 1, m, self.lo)
            return self.c * d / k
        # C(m,k) B(k-1, m-k+1) = m / (k (k-1))
        d = stats.binom.sf(k - 2, m - 1, self.hi) - stats.binom.sf(k - 2, m - 1, self.lo)
        return self.c * m * d / (k * (k - 1.0))

    def rate(self, b: int, k: int) -> float:
        if self.form == "linear":
            a, bb = k, b - k + 1
        else:
            a, bb = k - 1, b - k + 1
        d = special.betainc(a, bb, self.hi) - special.betainc(a, bb, self.lo)
        return float(self.c * special.beta(a, bb) * d)


@dataclass(frozen=True)
class LambdaMeasure:
    kingman: float = 1.0
    atoms: tuple[tuple[float, float], ...] = ()
    densities: tuple[Density, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.kingman) and self.kingman >= 0):
            raise ValidationError("kingman", f"must be finite and >= 0, got {self.kingman!r}")
        for i, (p, w) in enumerate(self.atoms):
            if not 0 < p <= 1:
                raise ValidationError(f"atoms[{i}]", f"location {p!r} outside (0, 1]")
            if not (math.isfinite(w) and w > 0):
                raise ValidationError(f"atoms[{i}]", f"weight {w!r} must be finite and > 0")
        if self.total_mass <= 0:
            raise ValidationError("<root>", "measure has zero total mass")

    # -- constructors -------------------------------------------------
    @classmethod
    def kingman_only(cls) -> LambdaMeasure:
        return cls(1.0)

    @classmethod
    def from_eta_atoms(cls, eta: list[tuple[float, float]], kingman: float = 1.0) -> LambdaMeasure:
        """delta_0 + sum m * p^2 delta_p for eta = sum m delta_p; equal locations merged."""
        merged: dict[float, float] = {}
        for p, m in eta:
            if m > 0:
                merged[p] = merged.get(p, 0.0) + m
        return cls(kingman, tuple(sorted((p, m * p * p) for p, m in merged.items())))

    @classmethod
    def from_dict(cls, d: Any) -> LambdaMeasure:
        if not isinstance(d, dict):
            raise ValidationError("<root>", "expected a JSON object")
        a = d.get("kingman", 1.0)
        if not isinstance(a, (int, float)) or isinstance(a, bool):
            raise ValidationError("kingman", f"expected a number, got {a!r}")
        atoms = []
        for i, at in enumerate(d.get("atoms", [])):
            if not (isinstance(at, (list, tuple)) and len(at) == 2
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in at)):
                raise ValidationError(f"atoms[{i}]", "expected a [p, w] number pair")
            atoms.append((float(at[0]), float(at[1])))
        dens = []
        for i, dd in enumerate(d.get("densities", [])):
            if not isinstance(dd, dict):
                raise ValidationError(f"densities[{i}]", "expected an object")
            form = dd.get("form")
            try:
                if form == "table":
                    breaks = [float(v) for v in dd["breaks"]]
                    values = [float(v) for v in dd["values"]]
                    if len(breaks) != len(values) + 1:
                        raise ValidationError(f"densities[{i}]", "table needs len(breaks) == len(values) + 1")
                    dens += [Density("constant", v, lo, hi)
                             for lo, hi, v in zip(breaks, breaks[1:], values) if v > 0]
                else:
                    dens.append(Density(str(form), float(dd["c"]),
                                        float(dd.get("lo", 0.0)), float(dd.get("hi", 1.0))))
            except KeyError as e:
                raise ValidationError(f"densities[{i}].{e.args[0]}", "missing") from None
            except ValidationError as e:
                if e.field.startswith("densities"):
                    raise
                raise ValidationError(f"densities[{i}].{e.field}", str(e).split(": ", 1)[-1]) from None
            except (TypeError, ValueError) as e:
                raise ValidationError(f"densities[{i}]", str(e)) from None
        return cls(float(a), tuple(atoms), tuple(dens))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kingman": self.kingman,
            "atoms": [[p, w] for p, w in self.atoms],
            "densities": [{"form": d.form, "c": d.c, "lo": d.lo, "hi": d.hi} for d in self.densities],
        }

    @classmethod
    def load(cls, path: str | Path) -> LambdaMeasure:
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ValidationError("<root>", f"invalid JSON: {e}") from None
        return cls.from_dict(d)

    # -- masses ---------------------------------------------------------
    @property
    def total_mass(self) -> float:
        return self.kingman + math.fsum(w for _, w in self.atoms) + math.fsum(d.mass for d in self.densities)

    @property
    def eta_mass(self) -> float:
        return math.fsum(w / (p * p) for p, w in self.atoms) + sum(d.eta_mass for d in self.densities)

    @property
    def linear_coefficient(self) -> float:
        return math.fsum(d.c for d in self.densities if d.form == "linear")

    def eta_tail(self, y: float) -> float:
        """eta([y, 1])."""
        t = math.fsum(w / (p * p) for p, w in self.atoms if p >= y)
        for d in self.densities:
            lo = max(d.lo, y)
            if lo >= d.hi:
                continue
            if lo == 0:
                return math.inf
            t += d.c * (math.log(d.hi / lo) if d.form == "linear" else 1 / lo - 1 / d.hi)
        return t

    def eta_components(self):
        """Arrays (kind, a1, a2, weight) for the event samplers.

        kind 0: atom at a1; kind 1: eta = c/y on [a1, a2]; kind 2: eta = c/y^2 on [a1, a2].
        """
        if not math.isfinite(self.eta_mass):
            raise UnsupportedMeasureError(
                "eta has infinite total mass (density reaches 0); simulation needs finite eta"
            )
        kind, a1, a2, w = [], [], [], []
        for p, m in self.atoms:
            kind.append(0); a1.append(p); a2.append(p); w.append(m / (p * p))
        for d in self.densities:
            if d.eta_mass > 0:
                kind.append(1 if d.form == "linear" else 2)
                a1.append(d.lo); a2.append(d.hi); w.append(d.eta_mass)
        return (np.array(kind, dtype=np.int64), np.array(a1, dtype=float),
                np.array(a2, dtype=float), np.array(w, dtype=float))

    def integrate(self, f) -> float:
        """Quadrature of f against Lambda (f evaluated at 0 for the Kingman part)."""
        total = self.kingman * f(0.0) + math.fsum(w * f(p) for p, w in self.atoms)
        for d in self.densities:
            v, _ = integrate.quad(lambda x: f(x) * float(d.h(x)), d.lo, d.hi,
                                  epsabs=1e-12, epsrel=1e-12, limit=200)
            total += v
        return total


@lru_cache(maxsize=65536)
def lambda_rate(measure: LambdaMeasure, b: int, k: int) -> float:
    """lambda_{b,k}: rate at which a given set of k of b blocks merges."""
    if not 2 <= k <= b:
        raise DomainError(f"need 2 <= k <= b, got b={b}, k={k}")
    r = measure.kingman if k == 2 else 0.0
    r += math.fsum(w * p ** (k - 2) * (1 - p) ** (b - k) for p, w in measure.atoms)
    r += math.fsum(d.rate(b, k) for d in measure.densities)
    return r


def lambda_rate_quadrature(measure: LambdaMeasure, b: int, k: int) -> float:
    """Reference value of lambda_{b,k} by adaptive quadrature."""
    if not 2 <= k <= b:
        raise DomainError(f"need 2 <= k <= b, got b={b}, k={k}")

    def f(x):
        if x == 0.0:
            return 1.0 if k == 2 else 0.0
        return x ** (k - 2) * (1 - x) ** (b - k)

    return measure.integrate(f)


def _atom_row(m: int, p: float, mass: float, out: np.ndarray) -> None:
    """Add mass * P(Bin(m, p) = k) for k = 2..m to out[k-2], on the window where it is not negligible."""
    if p >= 1.0:
        out[m - 2] += mass
        return
    sd = math.sqrt(m * p * (1 - p))
    lo = max(2, int(m * p - 40 * sd - 40))
    hi = min(m, int(m * p + 40 * sd + 40))
    if lo > hi:
        return
    k = np.arange(lo, hi + 1)
    out[lo - 2 : hi - 1] += mass * stats.binom.pmf(k, m, p)


def _jump_row(measure: LambdaMeasure, m: int) -> np.ndarray:
    row = np.zeros(m - 1)
    row[0] += measure.kingman * m * (m - 1) / 2
    for p, w in measure.atoms:
        _atom_row(m, p, w / (p * p), row)
    for d in measure.densities:
        row += d.jump_row(m)
    return row


@lru_cache(maxsize=4096)
def _jump_row_cached(measure: LambdaMeasure, m: int) -> np.ndarray:
    row = _jump_row(measure, m)
    row.setflags(write=False)
    return row


def jump_row(measure: LambdaMeasure, m: int) -> np.ndarray:
    """Array over k = 2..m of C(m,k) lambda_{m,k} (rate of any k-merger from m blocks)."""
    if m < 2:
        raise DomainError(f"m={m} < 2")
    return _jump_row_cached(measure, m) if m <= 512 else _jump_row(measure, m)


def total_rates(measure: LambdaMeasure, b: int) -> tuple[float, float]:
    """(lambda_b, alpha_b) with alpha_b = lambda_b - a*C(b,2)."""
    if b < 2:
        raise DomainError(f"b={b} < 2")
    lam = math.fsum(jump_row(measure, b))
    return lam, max(0.0, lam - measure.kingman * b * (b - 1) / 2)


def alpha_sequence(measure: LambdaMeasure, bmax: int) -> np.ndarray:
    """alpha_b for b = 2..bmax from closed forms, without summing jump rows."""
    b = np.arange(2, bmax + 1, dtype=float)
    out = np.zeros_like(b)
    for p, w in measure.atoms:
        q = 1.0 - p
        out += (w / (p * p)) * (1.0 - q**b - b * p * q ** (b - 1))
    for d in measure.densities:
        if d.form == "linear":
            # c * integral of sum_{j<b} (1-x)^j - b (1-x)^{b-1}
            j = np.arange(1, bmax + 1, dtype=float)
            terms = ((1 - d.lo) ** j - (1 - d.hi) ** j) / j
            cum = np.cumsum(terms)[1:]
            out += d.c * (cum - ((1 - d.lo) ** b - (1 - d.hi) ** b))
        else:
            def g(x, bb=b):
                return (-np.expm1(bb * np.log1p(-x)) - bb * x * (1 - x) ** (bb - 1)) / (x * x)
            v, _ = integrate.quad_vec(lambda x: g(x) if x > 0 else 0.5 * b * (b - 1),
                                      d.lo, d.hi, epsabs=1e-12, epsrel=1e-10)
            out += d.c * v
    return out


def lambda_from_sweep_spec(spec: SweepSpec) -> LambdaMeasure:
    """delta_0 plus x^2 eta(dx), eta having mass m*s at e^{-r(x)/s} per atom (m, x, s)."""
    eta = [(math.exp(-spec.r(a.x) / a.s), a.rate * a.s) for a in spec.atoms if a.rate > 0]
    return LambdaMeasure.from_eta_atoms(eta)


def example_single_site(s: float = 0.5, alpha: float = 1.0, p: float = 0.8) -> LambdaMeasure:
    """delta_0 + s*alpha*p^2 delta_p."""
    return LambdaMeasure(1.0, ((p, s * alpha * p * p),))


def example_linear(c: float, lo: float = 0.0) -> LambdaMeasure:
    return LambdaMeasure(1.0, (), (Density("linear", c, lo, 1.0),))


def example_uniform(c: float = 1.0) -> LambdaMeasure:
    return LambdaMeasure(1.0, (), (Density("constant", c, 0.0, 1.0),))

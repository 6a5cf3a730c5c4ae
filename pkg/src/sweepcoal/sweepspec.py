"""Beneficial-mutation intensity (an atomic measure on position x advantage)
paired with a piecewise-linear recombination-distance table."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class SweepAtom:
    rate: float
    x: float
    s: float


@dataclass(frozen=True)
class SweepSpec:
    half_length: float
    atoms: tuple[SweepAtom, ...]
    r_table: tuple[tuple[float, float], ...]

    def __post_init__(self):
        L = self.half_length
        if not (isinstance(L, (int, float)) and math.isfinite(L) and L > 0):
            raise ValidationError("L", f"half-length must be a finite positive number, got {L!r}")
        for i, a in enumerate(self.atoms):
            f = f"atoms[{i}]"
            if not (math.isfinite(a.rate) and a.rate >= 0):
                raise ValidationError(f + ".rate", f"must be finite and >= 0, got {a.rate!r}")
            if not -L <= a.x <= L:
                raise ValidationError(f + ".x", f"{a.x!r} outside [-{L}, {L}]")
            if not 0 < a.s <= 1:
                raise ValidationError(f + ".s", f"{a.s!r} outside (0, 1]")
        xs = [p[0] for p in self.r_table]
        rs = [p[1] for p in self.r_table]
        if len(xs) < 2:
            raise ValidationError("r_table", "needs at least two points")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValidationError("r_table", "x values must be strictly increasing")
        if xs[0] > -L or xs[-1] < L:
            raise ValidationError("r_table", f"must cover [-{L}, {L}]")
        if any(not (math.isfinite(r) and r >= 0) for r in rs):
            raise ValidationError("r_table", "r values must be finite and >= 0")
        if self.r(0.0) != 0.0:
            raise ValidationError("r_table", "r(0) must be 0")
        for (x0, r0), (x1, r1) in zip(self.r_table, self.r_table[1:]):
            if x1 <= 0 and r1 > r0:
                raise ValidationError("r_table", "r must be nonincreasing on [-L, 0]")
            if x0 >= 0 and r1 < r0:
                raise ValidationError("r_table", "r must be nondecreasing on [0, L]")

    def r(self, x: float) -> float:
        xs, rs = zip(*self.r_table)
        return float(np.interp(x, xs, rs))

    @property
    def total_rate(self) -> float:
        return math.fsum(a.rate for a in self.atoms)

    def to_dict(self) -> dict[str, Any]:
        return {
            "L": self.half_length,
            "atoms": [{"rate": a.rate, "x": a.x, "s": a.s} for a in self.atoms],
            "r_table": [list(p) for p in self.r_table],
        }

    @classmethod
    def from_dict(cls, d: Any) -> SweepSpec:
        if not isinstance(d, dict):
            raise ValidationError("<root>", "expected a JSON object")
        for key in ("L", "atoms", "r_table"):
            if key not in d:
                raise ValidationError(key, "missing")
        atoms = []
        if not isinstance(d["atoms"], list):
            raise ValidationError("atoms", "expected a list")
        for i, a in enumerate(d["atoms"]):
            if not isinstance(a, dict):
                raise ValidationError(f"atoms[{i}]", "expected an object")
            vals = []
            for k in ("rate", "x", "s"):
                v = a.get(k)
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise ValidationError(f"atoms[{i}].{k}", f"expected a number, got {v!r}")
                vals.append(float(v))
            atoms.append(SweepAtom(*vals))
        table = d["r_table"]
        if not isinstance(table, list) or not all(
            isinstance(p, (list, tuple)) and len(p) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
            for p in table
        ):
            raise ValidationError("r_table", "expected a list of [x, r] number pairs")
        L = d["L"]
        if not isinstance(L, (int, float)) or isinstance(L, bool):
            raise ValidationError("L", f"expected a number, got {L!r}")
        return cls(float(L), tuple(atoms), tuple((float(x), float(r)) for x, r in table))

    @classmethod
    def load(cls, path: str | Path) -> SweepSpec:
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ValidationError("<root>", f"invalid JSON: {e}") from None
        return cls.from_dict(d)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def single_site_spec(s: float, alpha: float, beta: float, z: float = 1.0) -> SweepSpec:
    """Mutations of advantage ``s`` at one site ``z`` at rate ``alpha``; r(z) = beta."""
    L = abs(z) if z != 0 else 1.0
    slope = beta / L if z != 0 else 0.0
    table = ((-L, slope * L), (0.0, 0.0), (L, slope * L))
    return SweepSpec(L, (SweepAtom(alpha, z, s),), table)


def single_site_spec_from_p(s: float, alpha: float, p: float, z: float = 1.0) -> SweepSpec:
    """Same, with beta chosen so that the merger coin is e^{-beta/s} = p."""
    return single_site_spec(s, alpha, -s * math.log(p), z)


def uniform_chromosome_spec(alpha: float, s: float, beta: float, L: float, grid: int = 100) -> SweepSpec:
    """Uniform mutation density ``alpha`` on [-L, L], r(x) = beta|x|, discretized at
    ``grid`` cell midpoints (each atom carries the mass of its cell)."""
    if grid < 1:
        raise ValidationError("grid", "must be >= 1")
    edges = np.linspace(-L, L, grid + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    w = alpha * 2 * L / grid
    atoms = tuple(SweepAtom(w, float(x), s) for x in mids)
    return SweepSpec(L, atoms, ((-L, beta * L), (0.0, 0.0), (L, beta * L)))


def spec_for_eta_atoms(points: Sequence[tuple[float, float]], eps: float) -> SweepSpec:
    """Spec whose limiting eta is sum w * delta_y over ``points`` = [(y, w), ...].

    Uses s = 1/2 and r(x) = |x| on [-L, L] with L = -log(eps)/2: an atom of mass
    2w at x = -log(y)/2 yields merger coin e^{-2x} = y with eta mass w. Every y
    must lie in [eps, 1].
    """
    if not 0 < eps < 1:
        raise ValidationError("eps", f"{eps!r} outside (0, 1)")
    L = -0.5 * math.log(eps)
    atoms = []
    for i, (y, w) in enumerate(points):
        if not eps <= y <= 1:
            raise ValidationError(f"points[{i}]", f"y={y!r} outside [{eps}, 1]")
        if w < 0:
            raise ValidationError(f"points[{i}]", "negative mass")
        atoms.append(SweepAtom(2.0 * w, -0.5 * math.log(y), 0.5))
    return SweepSpec(L, tuple(atoms), ((-L, L), (0.0, 0.0), (L, L)))


def spec_for_step_tail(ys: Sequence[float], tail: Sequence[float], eps: float) -> SweepSpec:
    """Spec whose eta has tail eta([y, 1]) = G(y) for a nonincreasing step G.

    ``G`` is given by its values ``tail[i]`` on the right-closed pieces: G(y) =
    tail[i] for ys[i-1] < y <= ys[i] (ys increasing, ys[-1] = 1). The jumps of
    G become eta atoms at the ``ys``.
    """
    ys = list(ys)
    tail = list(tail)
    if len(ys) != len(tail) or not ys:
        raise ValidationError("tail", "ys and tail must have the same nonzero length")
    if any(b <= a for a, b in zip(ys, ys[1:])):
        raise ValidationError("ys", "must be strictly increasing")
    if any(b > a for a, b in zip(tail, tail[1:])):
        raise ValidationError("tail", "G must be nonincreasing")
    nxt = tail[1:] + [0.0]
    return spec_for_eta_atoms([(y, g - g2) for y, g, g2 in zip(ys, tail, nxt) if g - g2 > 0], eps)

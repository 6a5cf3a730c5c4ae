from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sweepcoal.errors import DomainError, UnsupportedMeasureError, ValidationError
from sweepcoal.measures import (
    Density,
    LambdaMeasure,
    alpha_sequence,
    example_linear,
    example_single_site,
    example_uniform,
    jump_row,
    lambda_from_sweep_spec,
    lambda_rate,
    lambda_rate_quadrature,
    total_rates,
)
from sweepcoal.sweepspec import single_site_spec_from_p

from .oracles import lambda_rate_oracle

STAR = LambdaMeasure(1.0, ((1.0, 1.0),))
MEASURES = {
    "kingman": LambdaMeasure.kingman_only(),
    "star": STAR,
    "single-site": example_single_site(),
    "two-atoms": LambdaMeasure(1.0, ((0.3, 0.2), (0.9, 0.5))),
    "linear": example_linear(1.5),
    "linear-cut": example_linear(2.0, lo=0.2),
    "uniform": example_uniform(0.7),
    "mixed": LambdaMeasure(0.5, ((0.6, 0.1),), (Density("constant", 0.4, 0.1, 0.5),
                                                Density("linear", 1.0, 0.3, 0.9))),
}


def test_single_site_frozen_rate():
    # atom of mass s*alpha*p^2 at p: lambda_{3,3} = mass * p = 0.5 * 0.64 * 0.8
    m = example_single_site()
    assert lambda_rate(m, 3, 3) == pytest.approx(0.256, abs=1e-15)
    assert lambda_rate_oracle(m.kingman, m.atoms, 3, 3) == pytest.approx(0.256, abs=1e-15)


@pytest.mark.parametrize("b,k", [(2, 2), (3, 2), (3, 3), (5, 2), (5, 4), (8, 8)])
def test_uniform_density_closed_form(b, k):
    m = example_uniform(1.0)
    expect = (1.0 if k == 2 else 0.0) + math.gamma(k - 1) * math.gamma(b - k + 1) / math.gamma(b)
    assert lambda_rate(m, b, k) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("name", sorted(MEASURES))
@pytest.mark.parametrize("b", [2, 3, 6, 11])
def test_rates_against_quadrature(name, b):
    m = MEASURES[name]
    dens = None
    if m.densities:
        dens = (lambda x, m=m: sum(float(d.h(x)) for d in m.densities), 0.0, 1.0)
    for k in range(2, b + 1):
        ref = lambda_rate_oracle(m.kingman, m.atoms, b, k, dens)
        assert lambda_rate(m, b, k) == pytest.approx(ref, rel=1e-9, abs=1e-13)
        assert lambda_rate_quadrature(m, b, k) == pytest.approx(ref, rel=1e-9, abs=1e-13)


@pytest.mark.parametrize("name", sorted(MEASURES))
def test_consistency_recursion(name):
    m = MEASURES[name]
    for b in range(2, 12):
        for k in range(2, b + 1):
            assert lambda_rate(m, b, k) == pytest.approx(
                lambda_rate(m, b + 1, k) + lambda_rate(m, b + 1, k + 1), rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("name", sorted(MEASURES))
@pytest.mark.parametrize("b", [2, 5, 17, 600])
def test_jump_row_and_alpha(name, b):
    m = MEASURES[name]
    row = jump_row(m, b)
    if b <= 17:
        direct = [math.comb(b, k) * lambda_rate(m, b, k) for k in range(2, b + 1)]
        np.testing.assert_allclose(row, direct, rtol=1e-9, atol=1e-12)
    lam, al = total_rates(m, b)
    assert lam == pytest.approx(row.sum(), rel=1e-12)
    assert al == pytest.approx(lam - m.kingman * b * (b - 1) / 2, abs=1e-9 * lam)
    assert alpha_sequence(m, b)[-1] == pytest.approx(al, rel=1e-7, abs=1e-9)


@given(st.floats(0.05, 1.0), st.floats(0.01, 3.0), st.integers(2, 60))
def test_alpha_is_nondecreasing_and_bounded(p, w, b):
    m = LambdaMeasure(1.0, ((p, w),))
    a = alpha_sequence(m, b + 1)
    assert a[-1] >= a[-2] - 1e-12
    assert a[-1] <= w / (p * p) + 1e-12  # eta mass caps alpha


def test_eta_components_and_tail():
    m = MEASURES["mixed"]
    kind, a1, a2, w = m.eta_components()
    assert list(kind) == [0, 2, 1]
    assert w.sum() == pytest.approx(m.eta_mass)
    assert m.eta_tail(0.0) == pytest.approx(m.eta_mass)
    assert m.eta_tail(0.95) == 0.0
    with pytest.raises(UnsupportedMeasureError):
        example_linear(1.0).eta_components()


def test_from_eta_atoms_merges_locations():
    m = LambdaMeasure.from_eta_atoms([(0.5, 1.0), (0.5, 2.0), (0.2, 1.0)])
    np.testing.assert_allclose(m.atoms, [(0.2, 0.04), (0.5, 0.75)], atol=1e-15)


def test_lambda_from_sweep_spec():
    m = lambda_from_sweep_spec(single_site_spec_from_p(0.5, 1.0, 0.8))
    ref = example_single_site()
    assert m.atoms[0][0] == pytest.approx(0.8)
    assert m.atoms[0][1] == pytest.approx(ref.atoms[0][1])


def test_json_round_trip(tmp_path):
    m = MEASURES["mixed"]
    f = tmp_path / "m.json"
    f.write_text(json.dumps(m.to_dict()))
    assert LambdaMeasure.load(f) == m


def test_table_input_expands_to_constants():
    m = LambdaMeasure.from_dict({"densities": [{"form": "table", "breaks": [0, 0.5, 1], "values": [1, 0]}]})
    assert m.densities == (Density("constant", 1.0, 0.0, 0.5),)


@pytest.mark.parametrize("doc,field", [
    ({"kingman": -1}, "kingman"),
    ({"kingman": "x"}, "kingman"),
    ({"atoms": [[1.5, 1]]}, "atoms[0]"),
    ({"atoms": [[0.5]]}, "atoms[0]"),
    ({"densities": [{"form": "cubic", "c": 1}]}, "densities[0].form"),
    ({"densities": [{"form": "linear"}]}, "densities[0].c"),
    ({"densities": [{"form": "linear", "c": 1, "lo": 0.7, "hi": 0.2}]}, "densities[0].lo"),
    ({"kingman": 0}, "<root>"),
    ([], "<root>"),
])
def test_validation_names_the_field(doc, field):
    with pytest.raises(ValidationError) as ei:
        LambdaMeasure.from_dict(doc)
    assert ei.value.field == field
    assert str(ei.value).startswith(field)


def test_rate_domain():
    with pytest.raises(DomainError):
        lambda_rate(STAR, 3, 4)
    with pytest.raises(DomainError):
        total_rates(STAR, 1)

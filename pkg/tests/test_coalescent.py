from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sweepcoal.coalescent import (
    GenealogyPath,
    XiSweepMeasure,
    coalescent_ensemble,
    coupled_ensemble,
    coupled_kingman_lambda,
    first_jump_sizes,
    jump_law,
    kingman_law,
    lambda_generator,
    lambda_law,
    simulate_lambda,
    simulate_xi_sweep,
    xi_generator,
    xi_law,
)
from sweepcoal.compare import EmpiricalLaw, tv_estimate
from sweepcoal.errors import DegenerateMarkError, DomainError, UnsupportedMeasureError
from sweepcoal.measures import Density, LambdaMeasure, example_linear, example_single_site
from sweepcoal.partitions import Partition, tv_distance
from sweepcoal.sweepspec import single_site_spec_from_p

from .oracles import kingman3_law

STAR = LambdaMeasure(1.0, ((1.0, 1.0),))
EX23 = example_single_site()
CUT = LambdaMeasure(1.0, (), (Density("linear", 2.0, 0.2, 1.0), Density("constant", 0.5, 0.4, 0.6)))
SPEC = single_site_spec_from_p(0.5, 1.0, 0.8)


# -- paths ---------------------------------------------------------------

@pytest.mark.parametrize("measure", [LambdaMeasure.kingman_only(), STAR, EX23, CUT], ids=str)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_paths_are_coalescent_paths(measure, seed, n):
    path = simulate_lambda(measure, n, np.random.default_rng(seed))
    assert path.absorbed and len(path.partitions[-1]) == 1
    counts = path.block_counts()
    assert all(b < a for a, b in zip(counts, counts[1:]))
    # sum over block sizes of time equals the integral of the block count
    dur = np.diff(np.append(path.times, path.end))
    assert path.total_length == pytest.approx(float(np.dot(dur, counts)), rel=1e-12, abs=1e-12)
    assert path.at(path.end + 1) == path.partitions[-1]


def test_path_validation():
    s = Partition.singletons(2)
    with pytest.raises(DomainError):
        GenealogyPath(2, (0.0, 0.0), (s, Partition.single_block(2)), True, 0.0, np.zeros(1))
    with pytest.raises(DomainError):
        GenealogyPath(2, (0.0, 1.0), (s, s), True, 1.0, np.zeros(1))


def test_horizon_truncates():
    path = simulate_lambda(EX23, 6, np.random.default_rng(1), horizon=1e-4)
    assert path.end == 1e-4
    assert not path.absorbed or len(path.partitions[-1]) == 1


def test_infinite_eta_is_refused_by_sampler():
    with pytest.raises(UnsupportedMeasureError):
        simulate_lambda(example_linear(1.0), 4, np.random.default_rng(0))


# -- laws ------------------------------------------------------------------

@pytest.mark.parametrize("t", [0.1, 0.5, 2.0])
def test_kingman_law_block_counts(t):
    law = kingman_law(3, t)
    ref = kingman3_law(t)
    for b in (1, 2, 3):
        got = sum(w for p, w in law.weights.items() if len(p) == b)
        assert got == pytest.approx(ref[b], abs=1e-12)


def test_kingman_two_lineages():
    assert kingman_law(2, 0.7)[Partition.singletons(2)] == pytest.approx(math.exp(-0.7), rel=1e-12)


@pytest.mark.parametrize("measure", [STAR, EX23, CUT], ids=["star", "ex23", "cut"])
def test_generator_rows_sum_to_zero(measure):
    Q = lambda_generator(measure, 4)
    np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)
    assert (Q - np.diag(np.diag(Q)) >= 0).all()


@pytest.mark.parametrize("measure,n", [(EX23, 4), (CUT, 3), (STAR, 4)])
def test_lambda_law_matches_monte_carlo(measure, n):
    ens = coalescent_ensemble(measure, n, 20000, seed=3, horizon=0.4)
    est = tv_estimate(EmpiricalLaw.from_rgs(ens.rgs), lambda_law(measure, n, 0.4), np.random.default_rng(0))
    assert est.value < 3 * est.se + 0.005


def test_xi_law_matches_monte_carlo():
    xi = XiSweepMeasure(SPEC, 200)
    ens = coalescent_ensemble(xi, 3, 20000, seed=4, horizon=0.3)
    est = tv_estimate(EmpiricalLaw.from_rgs(ens.rgs), xi_law(xi, 3, 0.3), np.random.default_rng(0))
    assert est.value < 3 * est.se + 0.005


def test_xi_generator_is_a_generator():
    Q = xi_generator(XiSweepMeasure(SPEC, 200), 4)
    np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12)


def test_xi_approaches_lambda_as_population_grows():
    lam = lambda_law(EX23, 3, 0.3)
    gaps = [tv_distance(xi_law(XiSweepMeasure(SPEC, two_n), 3, 0.3), lam)
            for two_n in (200, 2000, 20000, 200000)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_xi_marks():
    xi = XiSweepMeasure(SPEC, 200)
    (rate, s, theta, m), = xi.marks()
    assert (rate, s, m) == (1.0, 0.5, 100)
    assert theta == pytest.approx(-0.5 * math.log(0.8) / (0.5 * math.log(200)))
    with pytest.raises(DegenerateMarkError):
        XiSweepMeasure(single_site_spec_from_p(0.1, 1.0, 0.8), 5)


def test_simulate_xi_path():
    path = simulate_xi_sweep(XiSweepMeasure(SPEC, 200), 7, np.random.default_rng(2))
    assert path.absorbed


def test_lattice_guard():
    with pytest.raises(DomainError):
        lambda_law(EX23, 7, 1.0)


# -- first jumps ------------------------------------------------------------

@pytest.mark.parametrize("measure,b", [(EX23, 6), (STAR, 5), (CUT, 8)], ids=["ex23", "star", "cut"])
def test_first_jump_law(measure, b):
    sizes = first_jump_sizes(measure, b, 40000, seed=6)
    law = jump_law(measure, b)
    freq = np.bincount(sizes, minlength=b + 1)[2:] / sizes.size
    se = np.sqrt(law * (1 - law) / sizes.size)
    assert np.all(np.abs(freq - law) <= 4 * se + 1e-12)


# -- ensembles and coupling ---------------------------------------------------

def test_ensemble_thread_invariance():
    a = coalescent_ensemble(EX23, 8, 3000, seed=7, threads=1, visits=True)
    b = coalescent_ensemble(EX23, 8, 3000, seed=7, threads=3, visits=True)
    for f in ("rgs", "lengths", "end", "visited", "nulls"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_coupled_paths():
    lam, king, same = coupled_kingman_lambda(STAR, 5, np.random.default_rng(3))
    assert king.absorbed and lam.absorbed
    assert all(len(b) - len(a) == -1 for a, b in zip(king.partitions, king.partitions[1:]))
    if same:
        assert lam.partitions == king.partitions
    with pytest.raises(UnsupportedMeasureError):
        coupled_kingman_lambda(LambdaMeasure(0.5, ((1.0, 1.0),)), 4, np.random.default_rng(0))


def test_coupling_kingman_mean_and_dominance():
    ens = coupled_ensemble(STAR, 3, 40000, seed=5)
    # (1 - 1/2)(1 - 1/4) for delta_0 + delta_1
    p = ens.identical.mean()
    assert p == pytest.approx(3 / 8, abs=4 * math.sqrt(3 / 8 * 5 / 8 / 40000))
    assert (ens.j_lambda <= ens.j_kingman + 1e-12).all()
    assert ens.j_kingman.mean() == pytest.approx(2.0, abs=4 * ens.j_kingman.std() / 200)

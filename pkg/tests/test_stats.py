from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sweepcoal.coalescent import GenealogyPath, XiSweepMeasure, coalescent_ensemble, simulate_lambda
from sweepcoal.ensemble import Estimate
from sweepcoal.errors import DivergenceError, DomainError, IncompleteTreeError, UnsupportedMeasureError
from sweepcoal.measures import Density, LambdaMeasure, example_linear, example_single_site, example_uniform
from sweepcoal.partitions import Partition
from sweepcoal.stats import (
    DStatConfig,
    MutatedGenealogy,
    SampleStats,
    coupling_identity_probability,
    coupling_lower_bound,
    d_statistics,
    expected_pairwise,
    expected_segregating,
    external_branch_deficit,
    fuli_constants,
    gn_table,
    gnb,
    harmonic,
    overlay_mutations,
    rho,
    sample_statistics,
    stats_ensemble,
    tajima_constants,
    visit_frequencies,
)
from sweepcoal.sweepspec import single_site_spec_from_p

from .oracles import star_visit

KINGMAN = LambdaMeasure.kingman_only()
STAR = LambdaMeasure(1.0, ((1.0, 1.0),))
EX23 = example_single_site()


# -- visit probabilities ------------------------------------------------------

def test_star_visit_frozen():
    assert star_visit(4, 2) == Fraction(9, 14)
    assert gnb(STAR, 4, 2) == pytest.approx(9 / 14, abs=1e-15)


@pytest.mark.parametrize("n", range(2, 9))
def test_star_visits_match_exact_recursion(n):
    G = gn_table(STAR, n)
    for b in range(2, n + 1):
        assert G[b] == pytest.approx(float(star_visit(n, b)), abs=1e-14)


def test_kingman_visits_everything():
    np.testing.assert_allclose(gn_table(KINGMAN, 12)[2:], 1.0)


@pytest.mark.parametrize("measure", [STAR, EX23], ids=["star", "ex23"])
def test_visits_against_monte_carlo(measure):
    ens = coalescent_ensemble(measure, 7, 20000, seed=1, visits=True)
    freq = visit_frequencies(ens)
    G = gn_table(measure, 7)
    for b in range(2, 8):
        se = math.sqrt(max(G[b] * (1 - G[b]), 1e-12) / ens.reps)
        assert abs(freq[b] - G[b]) <= 4 * se + 1e-12


def test_xi_visits_against_monte_carlo():
    xi = XiSweepMeasure(single_site_spec_from_p(0.5, 3.0, 0.6), 200)
    ens = coalescent_ensemble(xi, 6, 20000, seed=2, visits=True)
    G = gn_table(xi, 6)
    freq = visit_frequencies(ens)
    for b in range(2, 7):
        assert abs(freq[b] - G[b]) <= 4 * math.sqrt(G[b] * (1 - G[b]) / ens.reps) + 1e-12


def test_gnb_domain():
    with pytest.raises(DomainError):
        gnb(STAR, 4, 5)
    with pytest.raises(DomainError):
        gnb(STAR, 4, 1)


@given(st.floats(0.05, 1.0), st.floats(0.01, 5.0), st.integers(2, 30))
def test_visit_probabilities_are_probabilities(p, w, n):
    G = gn_table(LambdaMeasure(1.0, ((p, w),)), n)
    assert G[n] == 1.0
    assert ((G[2:] >= -1e-15) & (G[2:] <= 1 + 1e-12)).all()


# -- expectations ---------------------------------------------------------------

def test_kingman_segregating_frozen():
    assert expected_segregating(KINGMAN, 2.0, 10) == pytest.approx(5.657936507936508, rel=1e-14)
    assert 2.0 * harmonic(9) == pytest.approx(5.657936507936508, rel=1e-15)


def test_star_segregating_frozen():
    # lambda_3 = 4, lambda_2 = 2, G_3(2) = 3/4
    assert expected_segregating(STAR, 2.0, 3) == pytest.approx(1.5, abs=1e-14)


@pytest.mark.parametrize("measure", [KINGMAN, STAR, EX23], ids=["kingman", "star", "ex23"])
def test_two_lineages_reduce_to_pairwise(measure):
    assert expected_segregating(measure, 1.3, 2) == pytest.approx(expected_pairwise(measure, 1.3))


def test_segregating_against_overlay():
    tab = stats_ensemble(STAR, 3, 2.0, 40000, seed=3)
    est = Estimate.of(tab.segregating)
    assert est.within(1.5, k=4)


# -- sample statistics --------------------------------------------------------------

def _path3():
    parts = (Partition.singletons(3), Partition.parse("{1,2}{3}"), Partition.single_block(3))
    # size-1 branches: 3 * 1.0 + 1 * 1.5; the {1,2} block lives 1.5
    return GenealogyPath(3, (0.0, 1.0, 2.5), parts, True, 2.5, np.array([4.5, 1.5]))


def test_statistics_by_hand():
    g = MutatedGenealogy(3, np.array([4.5, 1.5]), np.array([2, 1]))
    st_ = sample_statistics(g)
    # two singleton mutations split 2 pairs each, the doubleton splits 2 pairs: 6 / 3
    assert (st_.segregating, st_.eta_e, st_.eta_i) == (3, 2, 1)
    assert st_.pairwise == pytest.approx(2.0)
    assert (st_.j, st_.i) == (4.5, 1.5)


def test_overlay_requires_complete_tree():
    path = simulate_lambda(EX23, 5, np.random.default_rng(0), horizon=1e-6)
    assert not path.absorbed
    with pytest.raises(IncompleteTreeError):
        overlay_mutations(path, 2.0, np.random.default_rng(0))
    g = overlay_mutations(path, 2.0, np.random.default_rng(0), allow_truncated=True)
    assert g.truncated


def test_overlay_counts_follow_lengths():
    rng = np.random.default_rng(1)
    path = _path3()
    counts = np.array([overlay_mutations(path, 2.0, rng).counts for _ in range(20000)])
    np.testing.assert_allclose(counts.mean(axis=0), [4.5, 1.5], rtol=0.03)


def test_kingman_variances_match_normalizations():
    """E[e1 S + e2 S(S-1)] and E[u S + v S^2] equal the variances of the two numerators."""
    n, theta = 10, 2.0
    tab = stats_ensemble(KINGMAN, n, theta, 100000, seed=4)
    a = harmonic(n - 1)
    b = math.fsum(1 / i**2 for i in range(1, n))
    e1, e2 = tajima_constants(n)
    u, v = fuli_constants(n)
    for x, expect in ((tab.tajima_numerator, e1 * a * theta + e2 * (a * a + b) * theta**2),
                      (tab.fuli_numerator, u * a * theta + v * (a * theta + (a * a + b) * theta**2))):
        sq = Estimate.of((x - x.mean()) ** 2)
        assert sq.within(expect, k=4)


def test_d_statistics_modes():
    st_ = SampleStats(10, 6, 2.4, 3, 3)
    num = d_statistics(st_, DStatConfig(2.0))
    assert num.tajima_d is None and num.fuli_d is None
    assert num.tajima_numerator == pytest.approx(2.4 - 6 / harmonic(9))
    assert num.fuli_numerator == pytest.approx(6 - harmonic(9) * 3)
    full = d_statistics(st_, DStatConfig(2.0, "classical"))
    e1, e2 = tajima_constants(10)
    assert full.tajima_d == pytest.approx(num.tajima_numerator / math.sqrt(e1 * 6 + e2 * 30))
    zero = d_statistics(SampleStats(10, 0, 0.0, 0, 0), DStatConfig(2.0, "classical"))
    assert zero.tajima_d is None
    with pytest.raises(DomainError):
        d_statistics(SampleStats(3, 1, 1.0, 1, 0), DStatConfig(2.0, "classical"))
    with pytest.raises(DomainError):
        DStatConfig(0.0)
    with pytest.raises(DomainError):
        DStatConfig(1.0, "other")


def test_kingman_means_are_neutral():
    tab = stats_ensemble(KINGMAN, 8, 2.0, 40000, seed=5)
    assert Estimate.of(tab.tajima_numerator).within(0.0, k=4)
    assert Estimate.of(tab.fuli_numerator).within(0.0, k=4)
    assert Estimate.of(tab.pairwise).within(2.0, k=4)


def test_stats_thread_invariance():
    a = stats_ensemble(EX23, 12, 2.0, 3000, seed=6, threads=1)
    b = stats_ensemble(EX23, 12, 2.0, 3000, seed=6, threads=4)
    np.testing.assert_array_equal(a.segregating, b.segregating)
    np.testing.assert_array_equal(a.pairwise, b.pairwise)


# -- rho ----------------------------------------------------------------------

def test_rho_kingman_is_zero():
    assert rho(KINGMAN, 2.0).rho == 0.0


def test_rho_matches_extrapolated_exact_deficit():
    res = rho(EX23, 2.0)
    assert res.truncation_bound < 5e-3
    d = {n: 2.0 * harmonic(n - 1) - expected_segregating(EX23, 2.0, n) for n in (500, 1000)}
    richardson = 2 * d[1000] - d[500]  # removes the c/n term
    assert abs(richardson - res.rho) <= res.truncation_bound + 1e-3


def test_rho_is_linear_in_theta():
    a, b = rho(EX23, 1.0), rho(EX23, 3.0)
    # levels may differ, so agreement is up to the reported bounds
    assert abs(b.rho - 3 * a.rho) <= b.truncation_bound + 3 * a.truncation_bound


def test_rho_linear_density_is_finite():
    res = rho(example_linear(1.0), 2.0, tol=0.1)
    assert res.rho > 0 and res.truncation_bound < 0.1


@pytest.mark.parametrize("measure", [example_uniform(1.0),
                                     LambdaMeasure(1.0, (), (Density("constant", 0.2, 0.0, 0.3),))])
def test_rho_refuses_divergent_measures(measure):
    with pytest.raises(DivergenceError, match="alpha_b"):
        rho(measure, 2.0)


# -- coupling -------------------------------------------------------------------

def test_identity_probability_frozen():
    assert coupling_identity_probability(STAR, 3) == pytest.approx(3 / 8, abs=1e-15)
    with pytest.raises(UnsupportedMeasureError):
        coupling_identity_probability(LambdaMeasure(2.0), 3)


@pytest.mark.parametrize("measure", [STAR, EX23, LambdaMeasure(1.0, ((0.3, 0.5),))], ids=["star", "ex23", "atom"])
def test_lower_bound_is_below_products(measure):
    lb = coupling_lower_bound(measure)
    assert 0 < lb <= coupling_identity_probability(measure, 200) + 1e-12


def test_kingman_deficit_is_exactly_zero():
    est = external_branch_deficit(KINGMAN, 10, 2000, np.random.default_rng(0))
    assert est.controlled.mean == 0.0 and est.controlled.se == 0.0
    assert est.kingman_mean.within(2.0, k=4)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from likelihood_lab import multinomial_efficiency as me
from likelihood_lab.families import get_family

FAMILIES = [("binomial", 0.3), ("hardy-weinberg", 0.3), ("linkage", 0.4)]
GRID = np.linspace(0.05, 0.95, 19)


def test_euler_relative_frequency_is_zero():
    est = me.relative_frequency(0)
    assert me.euler_degree_zero_check(est, [3.0, 5.0, 7.0]) == pytest.approx(0.0, abs=1e-15)


def test_euler_negative_control_degree_one():
    est = me.HomogeneousEstimator(lambda x: x[0], lambda x: np.array([1.0, 0.0]), "x1")
    x = np.array([4.0, 9.0])
    r = me.euler_degree_zero_check(est, x)
    assert r == pytest.approx(4.0)
    assert abs(r) > me.euler_tolerance(est, x)


def test_euler_log_ratio_hand_gradient():
    est = me.HomogeneousEstimator(lambda x: np.log(x[0] / x[1]), lambda x: np.array([1 / x[0], -1 / x[1]]))
    assert me.euler_degree_zero_check(est, [2.0, 3.0]) == pytest.approx(0.0, abs=1e-15)
    # finite-difference default agrees with the hand gradient
    fd = me.HomogeneousEstimator(lambda x: np.log(x[0] / x[1]))
    np.testing.assert_allclose(fd.grad([2.0, 3.0]), [0.5, -1 / 3], rtol=1e-8)


def test_euler_requires_positive_counts():
    with pytest.raises(ValueError):
        me.euler_degree_zero_check(me.relative_frequency(0), [0.0, 2.0])


def test_consistency_controls():
    binom = get_family("binomial")
    assert me.consistency_check(me.relative_frequency(0), binom, GRID) == pytest.approx(0.0, abs=1e-15)
    squared = me.HomogeneousEstimator(lambda x: (x[0] / x.sum()) ** 2)
    assert me.consistency_check(squared, binom, GRID) == pytest.approx(0.25, abs=1e-12)  # max |p^2 - p| at p=1/2
    allele = me.HomogeneousEstimator(lambda x: (2 * x[0] + x[1]) / (2 * x.sum()))
    assert me.consistency_check(allele, get_family("hardy-weinberg"), GRID) < 1e-15


def test_delta_variance_binomial_frequency():
    for n in (1, 10, 1000):
        v = me.delta_method_variance(me.relative_frequency(0), get_family("binomial"), 0.3, n)
        assert v == pytest.approx(0.3 * 0.7 / n, rel=1e-12)


@pytest.mark.parametrize("name,theta", FAMILIES)
def test_efficient_direction_identities(name, theta):
    fam = get_family(name)
    for th in GRID:
        d = me.efficient_direction(fam, th)
        f = fam.probs(np.array([th]))
        df = fam.derivs(np.array([th]))[0]
        assert d @ df == pytest.approx(1.0, abs=1e-10)
        assert d @ f == pytest.approx(0.0, abs=1e-10)
        assert np.sum(df * df / f) == pytest.approx(me.per_observation_information(fam, th), rel=1e-14)


def test_efficient_direction_binomial_by_hand():
    p = 0.3
    d = me.efficient_direction(get_family("binomial"), p)
    np.testing.assert_allclose(d, np.array([1 / p, -1 / (1 - p)]) * p * (1 - p), rtol=1e-14)


@pytest.mark.parametrize("name,theta", FAMILIES)
def test_efficient_direction_attains_bound(name, theta):
    fam = get_family(name)
    d = me.efficient_direction(fam, theta)
    est = me.HomogeneousEstimator(lambda x: 0.0, lambda x: (d - np.sum(x / x.sum() * d)) / x.sum(), "efficient")
    for n in (1, 50):
        v = me.delta_method_variance(est, fam, theta, n)
        assert v == pytest.approx(1 / (n * me.per_observation_information(fam, theta)), rel=1e-12)


@pytest.mark.parametrize("name,theta", FAMILIES)
def test_library_estimators_are_degree_zero_and_consistent(name, theta):
    fam = get_family(name)
    lib = me.estimator_library(fam)
    assert len(lib) >= 7
    rng = np.random.default_rng(3)
    for est in lib:
        for _ in range(5):
            x = rng.uniform(1, 50, fam.n_cells)
            assert abs(me.euler_degree_zero_check(est, x)) <= me.euler_tolerance(est, x)
            assert me.homogeneity_residual(est, x) <= 1e-9
        assert me.consistency_check(est, fam, np.linspace(0.1, 0.9, 9)) <= 1e-9


@pytest.mark.parametrize("name,theta", FAMILIES)
def test_library_variances_respect_the_bound(name, theta):
    fam = get_family(name)
    for th in (0.15, theta, 0.8):
        bound = 1 / me.per_observation_information(fam, th)
        for est in me.estimator_library(fam):
            assert me.delta_method_variance(est, fam, th, 1) >= bound - 1e-12


@pytest.mark.parametrize("name,theta", FAMILIES)
def test_tangency_of_efficient_estimators(name, theta):
    fam = get_family(name)
    for est in me.estimator_library(fam):
        rep = me.tangency_report(est, fam, theta)
        assert rep.mle_alignment == pytest.approx(1.0, abs=1e-6)
        assert rep.cosine_alignment == pytest.approx(np.sqrt(rep.bound / rep.delta_variance), abs=1e-6)
        efficient = abs(rep.delta_variance - rep.bound) <= 1e-9
        assert efficient == (abs(rep.cosine_alignment - 1) <= 1e-6)
    for special in ("mle", "min-chi2"):
        rep = me.tangency_report(next(e for e in me.estimator_library(fam) if e.name == special), fam, theta)
        assert rep.cosine_alignment == pytest.approx(1.0, abs=1e-6)
        assert rep.delta_variance == pytest.approx(rep.bound, abs=1e-9)


def test_single_cell_estimator_is_inefficient_on_hardy_weinberg():
    fam = get_family("hardy-weinberg")
    est = next(e for e in me.estimator_library(fam) if e.name == "sqrt-homozygote-1")
    rep = me.tangency_report(est, fam, 0.3)
    assert rep.cosine_alignment < 1 - 1e-3
    assert rep.delta_variance > rep.bound


def test_mle_estimator_matches_closed_form():
    fam = get_family("hardy-weinberg")
    mle = next(e for e in me.estimator_library(fam) if e.name == "mle")
    x = np.array([12.0, 40.0, 48.0])
    assert mle(x) == pytest.approx((2 * 12 + 40) / 200, abs=1e-12)


def test_delta_variance_against_monte_carlo():
    fam = get_family("hardy-weinberg")
    est = next(e for e in me.estimator_library(fam) if e.name == "sqrt-homozygote-1")
    n, R = 10_000, 2000
    rng = np.random.default_rng(5)
    f = fam.probs(np.array([0.3]))
    values = np.array([est(rng.multinomial(n, f).astype(float)) for _ in range(R)])
    formula = me.delta_method_variance(est, fam, 0.3, n)
    # SE of a sample variance is about sqrt(2/R) relative
    assert abs(values.var() / formula - 1) <= 3 * np.sqrt(2 / R)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 1000), min_size=3, max_size=3), st.integers(2, 50))
def test_integer_replication_invariance(counts, c):
    x = np.array(counts, dtype=float)
    for est in me.estimator_library(get_family("hardy-weinberg"))[:6]:
        assert est(c * x) == pytest.approx(est(x), rel=1e-12, abs=1e-15)


def test_requires_one_parameter_multinomial():
    with pytest.raises(TypeError):
        me.efficient_direction(get_family("normal"), 0.3)
    with pytest.raises(ValueError):
        me.estimator_library(get_family("simplex"))

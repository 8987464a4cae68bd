import itertools

import numpy as np
import pytest
from scipy import integrate

from likelihood_lab import information as info
from likelihood_lab.exceptions import SampleSpaceTooLarge
from likelihood_lab.families import fd_step, get_family, score


def _random_thetas(name, k=20, seed=0):
    rng = np.random.default_rng(seed)
    draw = {
        "normal-loc": lambda: [rng.uniform(-3, 3)],
        "normal": lambda: [rng.uniform(-3, 3), rng.uniform(0.3, 3)],
        "cauchy": lambda: [rng.uniform(-3, 3)],
        "gamma-shape": lambda: [rng.uniform(0.5, 6)],
        "binomial": lambda: [rng.uniform(0.05, 0.95)],
        "hardy-weinberg": lambda: [rng.uniform(0.05, 0.95)],
        "linkage": lambda: [rng.uniform(0.05, 0.95)],
    }[name]
    return [np.array(draw()) for _ in range(k)]


@pytest.mark.parametrize("name", ["normal-loc", "normal", "cauchy", "gamma-shape", "binomial", "hardy-weinberg",
                                  "linkage"])
def test_information_forms_agree(name):
    fam = get_family(name)
    for theta in _random_thetas(name):
        rep = info.expected_information(fam, theta, n=7)
        assert rep.max_pairwise_discrepancy <= 1e-5
        assert np.all(np.abs(rep.mean_score) <= 1e-5)
        assert rep.total_probability == pytest.approx(1.0, abs=1e-6)
        assert not rep.flagged
        assert np.all(np.linalg.eigvalsh(rep.I_score_sq) > 0)


def test_normal_location_information_is_n():
    rep = info.expected_information(get_family("normal-loc"), [0.4], n=9)
    assert rep.I_score_sq[0, 0] == pytest.approx(9.0, rel=1e-8)


def test_cauchy_information_is_half_per_observation():
    # independent oracle: direct quadrature of score**2 * density on the real line
    def integrand(x):
        return (2 * x / (1 + x * x)) ** 2 / (np.pi * (1 + x * x))

    direct, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13)
    assert direct == pytest.approx(0.5, abs=1e-10)
    rep = info.expected_information(get_family("cauchy"), [1.3], n=4)
    assert rep.I_neg_hessian[0, 0] == pytest.approx(2.0, abs=1e-6)
    assert rep.I_score_sq[0, 0] == pytest.approx(2.0, abs=1e-6)


def test_binomial_information_by_summation_over_k():
    n, p = 15, 0.27
    fam = get_family("binomial")
    rep = info.expected_information(fam, [p], n=n)
    from scipy.stats import binom
    k = np.arange(n + 1)
    oracle = np.sum(binom.pmf(k, n, p) * (k / p - (n - k) / (1 - p)) ** 2)
    assert oracle == pytest.approx(n / (p * (1 - p)), rel=1e-12)
    assert rep.method == "enumeration"
    assert rep.I_score_sq[0, 0] == pytest.approx(oracle, rel=1e-10)
    assert rep.I_neg_hessian[0, 0] == pytest.approx(oracle, rel=1e-10)


def test_normal_scale_information_matrix():
    rep = info.expected_information(get_family("normal"), [0.0, 2.0], n=1)
    np.testing.assert_allclose(rep.I_score_sq, [[0.25, 0.0], [0.0, 0.5]], atol=1e-8)


def test_mixture_score_has_mean_zero():
    rep = info.expected_information(get_family("mixture"), [0.3, -1.0, 0.7, 2.0, 1.4], n=1)
    assert np.all(np.abs(rep.mean_score) <= 1e-5)
    assert rep.total_probability == pytest.approx(1.0, abs=1e-6)


def test_observed_information_normal_is_n():
    x = np.random.default_rng(1).normal(size=13)
    assert info.observed_information(get_family("normal-loc"), x, [0.2])[0, 0] == pytest.approx(13.0)


def test_observed_information_cauchy_matches_score_differences():
    fam = get_family("cauchy")
    x = [-1.0, 0.0, 1.0]
    h = fd_step(np.array([0.0]))[0]
    fd = -(score(fam, x, [h])[0] - score(fam, x, [-h])[0]) / (2 * h)
    assert info.observed_information(fam, x, [0.0])[0, 0] == pytest.approx(fd, abs=1e-6)
    assert info.observed_information(fam, x, [0.0])[0, 0] > 0


# -- enumeration ------------------------------------------------------------------

def test_anova_sufficient_statistic_leaves_no_residual():
    fam = get_family("binomial")
    d = info.anova_decomposition(fam, 12, info.cell_count(0), [0.3])
    assert d.e_var_X_given_T <= 1e-12
    assert abs(d.identity_residual) <= 1e-10
    assert d.var_X == pytest.approx(12 / (0.3 * 0.7), rel=1e-12)
    assert d.n_outcomes == 2**12 and d.n_groups == 13


def test_anova_first_half_keeps_half_the_information():
    fam = get_family("binomial")
    d = info.anova_decomposition(fam, 12, info.cell_count(0, list(range(6))), [0.3])
    assert d.e_var_X_given_T > 0
    assert d.var_e_X_given_T == pytest.approx(d.var_X / 2, rel=1e-10)
    assert abs(d.identity_residual) <= 1e-10


def test_anova_brute_force_oracle():
    # independent enumeration with itertools on a small Hardy-Weinberg model
    fam = get_family("hardy-weinberg")
    theta, n = 0.35, 4
    f = fam.probs(np.array([theta]))
    cs = fam.derivs(np.array([theta]))[0] / f
    probs, xs, ts = [], [], []
    for outcome in itertools.product(range(3), repeat=n):
        probs.append(np.prod(f[list(outcome)]))
        xs.append(sum(cs[o] for o in outcome))
        ts.append(outcome[0])
    probs, xs, ts = map(np.array, (probs, xs, ts))
    mean = probs @ xs
    var = probs @ (xs - mean) ** 2
    cond = {t: (probs[ts == t] @ xs[ts == t]) / probs[ts == t].sum() for t in range(3)}
    var_e = sum(probs[ts == t].sum() * (cond[t] - mean) ** 2 for t in range(3))
    d = info.anova_decomposition(fam, n, lambda o: o[:, 0].astype(float), [theta])
    assert d.var_X == pytest.approx(var, rel=1e-12)
    assert d.var_e_X_given_T == pytest.approx(var_e, rel=1e-12)


def test_enumeration_guard():
    with pytest.raises(SampleSpaceTooLarge):
        info.anova_decomposition(get_family("hardy-weinberg"), 15, info.cell_count(0), [0.3])


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.77])
def test_proportion_attains_the_bound(p):
    n = 12
    rep = info.information_inequality_report(get_family("binomial"), n, lambda o: (o == 0).sum(axis=1) / n, [p])
    assert rep.unbiased
    assert rep.var_T == pytest.approx(p * (1 - p) / n, rel=1e-12)
    assert rep.var_T == pytest.approx(rep.bound, rel=1e-12)
    assert rep.inequality_holds


def test_shrunk_proportion_is_reported_as_biased():
    n = 12
    stat = lambda o: ((o == 0).sum(axis=1) + 1) / (n + 2)  # noqa: E731
    rep = info.information_inequality_report(get_family("binomial"), n, stat, [0.3])
    assert rep.bias == pytest.approx((0.3 * n + 1) / (n + 2) - 0.3, rel=1e-12)
    assert not rep.unbiased and rep.inequality_holds is None
    # at p = 1/2 the bias vanishes but dE[T]/dp = n/(n+2), so it is still not unbiased
    half = info.information_inequality_report(get_family("binomial"), n, stat, [0.5])
    assert abs(half.bias) < 1e-15
    assert half.var_T < 0.25 / n
    assert half.mean_derivative == pytest.approx(n / (n + 2), rel=1e-12)
    assert not half.unbiased and half.inequality_holds is None
    assert half.corrected_slack >= -1e-12


def test_hardy_weinberg_mle_inequality():
    n = 8
    stat = lambda o: (2 * (o == 0).sum(axis=1) + (o == 1).sum(axis=1)) / (2 * n)  # noqa: E731
    rep = info.information_inequality_report(get_family("hardy-weinberg"), n, stat, [0.3])
    assert rep.unbiased
    assert rep.slack >= -1e-10
    assert rep.corrected_slack >= -1e-10

"""Efficiency of degree-zero homogeneous estimators of a multinomial parameter.

An estimator ``T = phi(x_1, ..., x_s)`` of the counts that is homogeneous of
degree zero depends on the relative frequencies only, and Euler's relation
gives ``sum_t x_t dphi/dx_t = 0``.  Consistency pins ``phi`` on the
expectation curve, ``phi(f(theta)) = theta``, which after differentiation
reads ``sum_t dphi/dx_t * df_t/dtheta = 1`` (gradient taken at the
expectation point on the relative-frequency scale).  Under multinomial
covariances the first-order variance is

    Var(T) = (1/n) * [sum_t f_t g_t**2 - (sum_t f_t g_t)**2]

with ``g`` that gradient.  Minimising it subject to the consistency
condition gives ``g_t = (f_t'/f_t) / sum_u f_u'**2/f_u``, whose variance is
``1 / (n I_1)``.  All functions here are for a one-dimensional ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from ._validation import check_count
from .families import MultinomialFamily, check_domain

__all__ = [
    "HomogeneousEstimator",
    "EfficiencyReport",
    "euler_degree_zero_check",
    "euler_tolerance",
    "homogeneity_residual",
    "consistency_check",
    "delta_method_variance",
    "efficient_direction",
    "per_observation_information",
    "tangency_report",
    "relative_frequency",
    "mle_estimator",
    "min_chisquare_estimator",
    "estimator_library",
]


@dataclass(frozen=True)
class HomogeneousEstimator:
    """A statistic of the cell counts with an optional analytic gradient.

    ``phi`` maps a 1-D count vector (floats allowed) to a real number.  The
    default gradient is a central difference with step ``1e-6 * sum(x)``.
    """

    phi: Callable
    gradient: Optional[Callable] = None
    name: str = "phi"

    def __call__(self, x):
        return float(self.phi(np.asarray(x, dtype=float)))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        h = 1e-6 * float(np.sum(x))
        out = np.empty_like(x)
        for t in range(x.size):
            e = np.zeros_like(x)
            e[t] = h
            out[t] = (self.phi(x + e) - self.phi(x - e)) / (2 * h)
        return out


@dataclass
class EfficiencyReport:
    theta: float
    n: int
    estimate_at_expectation: float
    delta_variance: float
    bound: float
    efficiency: float
    gradient_at_expectation: np.ndarray
    efficient_direction: np.ndarray
    cosine_alignment: float
    mle_direction: np.ndarray
    mle_alignment: float
    euler_residual: float
    consistency_residual: float
    assumption: str = "no bias of order n**-1/2 or larger (assumed, not checked)"


def _one_dim(fam):
    if not isinstance(fam, MultinomialFamily) or fam.param_dim != 1:
        raise TypeError("a one-parameter MultinomialFamily is required")


def _curve(fam, theta):
    theta = check_domain(fam, theta)
    f = fam.probs(theta)
    if np.any(f <= 0):
        raise ZeroDivisionError(f"a cell probability vanishes at theta={theta[0]}")
    return theta, f, fam.derivs(theta)[0]


def euler_degree_zero_check(est, x):
    """``sum_t x_t dphi/dx_t`` at positive counts ``x`` (zero for degree-zero ``phi``)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("Euler check needs strictly positive counts")
    return float(x @ est.grad(x))


def euler_tolerance(est, x, rtol=1e-8):
    """Acceptance threshold ``rtol * |x| * |grad phi(x)|`` for the Euler residual."""
    x = np.asarray(x, dtype=float)
    return rtol * float(np.linalg.norm(x) * np.linalg.norm(est.grad(x)))


def homogeneity_residual(est, x, factors=(2, 3, 10)):
    """``max_c |phi(c x) - phi(x)|`` over the scale factors."""
    x = np.asarray(x, dtype=float)
    base = est(x)
    return max(abs(est(c * x) - base) for c in factors)


def consistency_check(est, fam, theta_grid):
    """``max |phi(f(theta)) - theta|`` over an interior grid."""
    _one_dim(fam)
    worst = 0.0
    for th in np.atleast_1d(np.asarray(theta_grid, dtype=float)):
        _, f, _ = _curve(fam, th)
        worst = max(worst, abs(est(f) - th))
    return worst


def per_observation_information(fam, theta):
    """``I_1(theta) = sum_t f_t'**2 / f_t``."""
    _one_dim(fam)
    _, f, df = _curve(fam, theta)
    return float(np.sum(df * df / f))


def delta_method_variance(est, fam, theta, n):
    """First-order variance of ``est`` on counts of a sample of size ``n``.

    The gradient is taken at the expectation point ``n f(theta)``; in count
    coordinates the multinomial covariance ``n (f_t delta_tu - f_t f_u)``
    gives ``n * [sum f phi_t**2 - (sum f phi_t)**2]``.  The second term is
    zero by Euler's relation and is kept as a computed check.
    """
    _one_dim(fam)
    n = check_count(n, "n")
    _, f, _ = _curve(fam, theta)
    g = est.grad(n * f)
    return float(n * (np.sum(f * g * g) - np.sum(f * g) ** 2))


def efficient_direction(fam, theta):
    """Variance-minimising gradient ``(f'/f) / sum(f'**2 / f)`` on the relative-frequency scale."""
    _one_dim(fam)
    _, f, df = _curve(fam, theta)
    score = df / f
    return score / np.sum(score * df)


def _f_weighted_cosine(a, b, f):
    a = a - np.sum(f * a)
    b = b - np.sum(f * b)
    na = np.sqrt(np.sum(f * a * a))
    nb = np.sqrt(np.sum(f * b * b))
    return float(np.sum(f * a * b) / (na * nb))


def _mle_gradient_at(fam, theta, r):
    """Implicit derivative of the root of ``sum r_t f_t'/f_t = 0`` w.r.t. ``r``."""
    th = np.array([theta])
    f = fam.probs(th)
    df = fam.derivs(th)[0]
    d2f = fam.second_derivs(th)[0, 0]
    dG_dtheta = np.sum(r * (d2f / f - df * df / f**2))
    return -(df / f) / dG_dtheta


def tangency_report(est, fam, theta, n=1):
    """Compare ``est``'s equistatistical surface with the efficient direction at ``f(theta)``.

    Only the ``f``-centred part of the gradient affects first-order variance,
    so alignment is measured as a cosine in the ``f``-weighted inner product.
    By Cauchy-Schwarz the cosine equals ``sqrt(bound / delta_variance)`` for a
    consistent estimator, so it is 1 exactly when the variance attains the
    bound.  The maximum likelihood surface gradient, obtained by implicit
    differentiation of the likelihood equation, is reported alongside.
    """
    _one_dim(fam)
    n = check_count(n, "n")
    th, f, _ = _curve(fam, theta)
    theta0 = float(th[0])
    g = est.grad(f)
    direction = efficient_direction(fam, theta0)
    mle_dir = _mle_gradient_at(fam, theta0, f)
    info = per_observation_information(fam, theta0)
    return EfficiencyReport(
        theta=theta0,
        n=n,
        estimate_at_expectation=est(f),
        delta_variance=delta_method_variance(est, fam, theta0, n),
        bound=1.0 / (n * info),
        efficiency=(1.0 / (n * info)) / delta_method_variance(est, fam, theta0, n),
        gradient_at_expectation=g,
        efficient_direction=direction,
        cosine_alignment=_f_weighted_cosine(g, direction, f),
        mle_direction=mle_dir,
        mle_alignment=_f_weighted_cosine(mle_dir, direction, f),
        euler_residual=float(f @ g),
        consistency_residual=float(g @ fam.derivs(th)[0] - 1.0),
    )


# -- estimators ---------------------------------------------------------------

def relative_frequency(cell, name=None):
    """``x_cell / sum(x)`` with its exact gradient."""
    def phi(x):
        return x[cell] / np.sum(x)

    def grad(x):
        N = np.sum(x)
        g = -np.full(x.size, x[cell]) / N**2
        g[cell] += 1.0 / N
        return g

    return HomogeneousEstimator(phi, grad, name or f"freq[{cell}]")


def _root_on_grid(fam, G):
    """Root of a decreasing-through-zero criterion ``G(theta)`` via grid scan plus Brent."""
    lo, hi = fam.param_domain[0]
    grid = lo + (hi - lo) * np.linspace(1e-6, 1 - 1e-6, 401)
    vals = np.array([G(t) for t in grid])
    sign_change = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if sign_change.size == 0:
        return float(grid[0] if vals[0] <= 0 else grid[-1])
    k = sign_change[0]
    return brentq(G, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)


def mle_estimator(fam):
    """The maximum likelihood estimate as a function of the counts."""
    _one_dim(fam)

    def phi(x):
        r = np.asarray(x, dtype=float) / np.sum(x)

        def G(t):
            th = np.array([t])
            return np.sum(r * fam.derivs(th)[0] / fam.probs(th))

        return _root_on_grid(fam, G)

    def grad(x):
        x = np.asarray(x, dtype=float)
        N = np.sum(x)
        r = x / N
        g = _mle_gradient_at(fam, phi(x), r)
        return (g - np.sum(r * g)) / N

    return HomogeneousEstimator(phi, grad, "mle")


def min_chisquare_estimator(fam):
    """The minimum chi-square estimate as a function of the counts.

    Its gradient comes from implicit differentiation of the stationarity
    condition ``G(theta, r) = sum r_t**2 f_t' / f_t**2 = 0``.
    """
    _one_dim(fam)

    def phi(x):
        r = np.asarray(x, dtype=float) / np.sum(x)

        def G(t):
            th = np.array([t])
            f = fam.probs(th)
            return np.sum(r * r * fam.derivs(th)[0] / f**2)

        return _root_on_grid(fam, G)

    def grad(x):
        x = np.asarray(x, dtype=float)
        N = np.sum(x)
        r = x / N
        th = np.array([phi(x)])
        f = fam.probs(th)
        df = fam.derivs(th)[0]
        d2f = fam.second_derivs(th)[0, 0]
        dG_dr = 2 * r * df / f**2
        dG_dtheta = np.sum(r * r * (d2f / f**2 - 2 * df * df / f**3))
        g = -dG_dr / dG_dtheta
        return (g - np.sum(r * g)) / N

    return HomogeneousEstimator(phi, grad, "min-chi2")


def _share(w, scale=1.0, offset=0.0, name="share"):
    """``offset + scale * (w . x) / sum(x)`` with its exact gradient."""
    w = np.asarray(w, dtype=float)

    def grad(x):
        N = np.sum(x)
        return scale * (w / N - (w @ x) / N**2)

    return HomogeneousEstimator(lambda x: offset + scale * (w @ x) / np.sum(x), grad, name)


def _sqrt_share(cell, n_cells, sign=1.0, offset=0.0, name="sqrt-share"):
    """``offset + sign * sqrt(x_cell / sum(x))`` with its exact gradient."""
    inner = _share(np.eye(n_cells)[cell])

    def grad(x):
        return sign * inner.grad(x) / (2 * np.sqrt(inner(x)))

    return HomogeneousEstimator(lambda x: offset + sign * np.sqrt(x[cell] / np.sum(x)), grad, name)


def _ratio(num, den, name):
    """``(num . x) / (den . x)``, both linear forms, with its exact gradient."""
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)

    def grad(x):
        a, b = num @ x, den @ x
        return (num * b - den * a) / b**2

    return HomogeneousEstimator(lambda x: (num @ x) / (den @ x), grad, name)


def _average(e1, e2, name):
    return HomogeneousEstimator(lambda x: 0.5 * (e1(x) + e2(x)), lambda x: 0.5 * (e1.grad(x) + e2.grad(x)), name)


def _hw_library():
    s1 = _sqrt_share(0, 3, name="sqrt-homozygote-1")
    s2 = _sqrt_share(2, 3, sign=-1.0, offset=1.0, name="sqrt-homozygote-2")
    return [
        _share([1.0, 0.5, 0.0], name="allele-count"),
        s1,
        s2,
        _average(s1, s2, "sqrt-average"),
        _ratio([1.0, 0.0, 0.0], [1.0, 0.5, 0.0], "ratio-1"),
        _ratio([0.0, 0.5, 0.0], [0.0, 0.5, 1.0], "ratio-2"),
    ]


def _binomial_library():
    # on two cells every consistent degree-zero estimator is x_1/N; these are distinct formulas for it
    freq_grad = _share([1.0, 0.0]).grad
    return [
        _share([1.0, 0.0], name="frequency"),
        _share([0.0, 1.0], scale=-1.0, offset=1.0, name="one-minus-frequency"),
        HomogeneousEstimator(lambda x: (x[0] / x[1]) / (1 + x[0] / x[1]), freq_grad, "odds"),
        HomogeneousEstimator(lambda x: 1 / (1 + np.exp(np.log(x[1]) - np.log(x[0]))), freq_grad, "logit"),
        HomogeneousEstimator(lambda x: x[0] ** 2 / (x[0] ** 2 + x[0] * x[1]), freq_grad, "quadratic-ratio"),
    ]


def _linkage_library():
    # cells ((2+t)/4, (1-t)/4, (1-t)/4, t/4)
    return [
        _share([0, 0, 0, 1], scale=4.0, name="cell-4"),
        _share([1, 0, 0, 0], scale=4.0, offset=-2.0, name="cell-1"),
        _share([0, 1, 1, 0], scale=-2.0, offset=1.0, name="cells-2-3"),
        _share([1, 0, 0, 1], scale=2.0, offset=-1.0, name="cells-1-4"),
        _share([1, -1, -1, 1], name="contrast"),
    ]


def estimator_library(fam):
    """Consistent degree-zero estimators shipped for ``fam``, plus its MLE and minimum chi-square."""
    builders = {"hardy-weinberg": _hw_library, "binomial": _binomial_library, "linkage": _linkage_library}
    if fam.name not in builders:
        raise ValueError(f"no estimator library for family {fam.name!r}")
    return builders[fam.name]() + [mle_estimator(fam), min_chisquare_estimator(fam)]

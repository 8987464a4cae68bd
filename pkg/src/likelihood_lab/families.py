"""Parametric families, samples, and the likelihood primitives built on them.

A family bundles a vectorised per-observation log-density with a seeded
sampler and a parameter domain given as one open interval per coordinate.
Analytic score and Hessian functions are optional; when absent the
likelihood derivatives fall back to central finite differences with step
``h_k = eps**(1/3) * max(1, |theta_k|)``.

Multinomial families are observed as cell counts.  Their "single observation"
is a cell index, so the same per-observation machinery (information sums,
enumeration) applies to them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import digamma, gammaln, polygamma, xlogy

from ._validation import as_theta, check_count
from .exceptions import DomainError

__all__ = [
    "ParametricFamily",
    "MultinomialFamily",
    "Sample",
    "FD_STEP_EXPONENT",
    "fd_step",
    "check_domain",
    "log_likelihood",
    "sample",
    "score",
    "hessian",
    "normal_location",
    "normal_location_scale",
    "cauchy_location",
    "gamma_shape",
    "multinomial_family",
    "binomial",
    "hardy_weinberg",
    "linkage",
    "simplex_multinomial",
    "normal_mixture",
    "neyman_scott",
    "FAMILY_NAMES",
    "get_family",
]

EPS = np.finfo(float).eps
FD_STEP_EXPONENT = 1.0 / 3.0


def fd_step(theta):
    """Central-difference step per coordinate: ``eps**(1/3) * max(1, |theta|)``."""
    return EPS ** FD_STEP_EXPONENT * np.maximum(1.0, np.abs(theta))


@dataclass(frozen=True, kw_only=True, eq=False)
class ParametricFamily:
    """Model contract used throughout the package.

    Parameters
    ----------
    name : str
        Registry name (e.g. ``"cauchy"``).
    param_dim : int
        Number of free parameters.
    param_domain : tuple of (low, high)
        Open interval per coordinate; bounds may be infinite.
    log_density : callable
        ``log_density(x, theta) -> ndarray`` giving one log-density per
        observation of ``x``.
    sampler : callable
        ``sampler(theta, n, rng) -> ndarray`` drawing ``n`` observations with a
        :class:`numpy.random.Generator`.
    analytic_score, analytic_hessian : callable, optional
        Total score vector ``(d,)`` and Hessian ``(d, d)`` of
        ``sum(log_density(x, theta))``.
    analytic_information : callable, optional
        Per-observation expected information matrix ``theta -> (d, d)``.
    support : (low, high)
        Observation space for continuous families.
    initial_guess : callable, optional
        Data-driven starting point for the likelihood solver.
    multimodal : bool
        Whether the likelihood may have several local maxima in ``theta``.
    quad_hint : callable, optional
        ``theta -> (center, scale)`` used to map infinite integration ranges.
    constraint : callable, optional
        Extra domain condition beyond the per-coordinate intervals.
    """

    name: str
    param_dim: int
    param_domain: tuple
    log_density: Callable
    sampler: Callable
    analytic_score: Optional[Callable] = None
    analytic_hessian: Optional[Callable] = None
    analytic_information: Optional[Callable] = None
    support: tuple = (-np.inf, np.inf)
    initial_guess: Optional[Callable] = None
    multimodal: bool = False
    quad_hint: Optional[Callable] = None
    constraint: Optional[Callable] = None
    param_names: tuple = ()
    discrete: bool = False

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_dim,) or not np.all(np.isfinite(theta)):
            return False
        for value, (low, high) in zip(theta, self.param_domain):
            if not low < value < high:
                return False
        return self.constraint is None or bool(self.constraint(theta))

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, param_dim={self.param_dim})"


@dataclass(frozen=True, kw_only=True, eq=False)
class MultinomialFamily(ParametricFamily):
    """Multinomial model whose cell probabilities depend smoothly on ``theta``.

    ``cell_probs(theta)`` returns ``(s,)``, ``cell_prob_derivs(theta)`` returns
    ``(d, s)`` and ``cell_prob_second_derivs(theta)`` returns ``(d, d, s)``.
    Observations of a single draw are cell indices; samples are count vectors.
    """

    n_cells: int
    cell_probs: Callable
    cell_prob_derivs: Callable
    cell_prob_second_derivs: Optional[Callable] = None
    discrete: bool = True

    def probs(self, theta):
        return np.asarray(self.cell_probs(np.asarray(theta, dtype=float)), dtype=float)

    def derivs(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.asarray(self.cell_prob_derivs(theta), dtype=float).reshape(self.param_dim, self.n_cells)

    def second_derivs(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.cell_prob_second_derivs is not None:
            out = self.cell_prob_second_derivs(theta)
            return np.asarray(out, dtype=float).reshape(self.param_dim, self.param_dim, self.n_cells)
        h = fd_step(theta)
        out = np.empty((self.param_dim, self.param_dim, self.n_cells))
        for k in range(self.param_dim):
            e = np.zeros(self.param_dim)
            e[k] = h[k]
            out[k] = (self.derivs(theta + e) - self.derivs(theta - e)) / (2 * h[k])
        return 0.5 * (out + out.transpose(1, 0, 2))


@dataclass(frozen=True, eq=False)
class Sample:
    """Observations plus provenance.

    ``values`` holds real observations for continuous families, cell counts
    for multinomial families and a ``(J, 2)`` array for the Neyman-Scott
    paired design.
    """

    values: np.ndarray
    n: int
    meta: dict = field(default_factory=dict)


def _values(data):
    return np.asarray(getattr(data, "values", data), dtype=float)


def check_domain(family, theta):
    """Validate ``theta`` against the family's open parameter domain."""
    theta = as_theta(theta, family.param_dim)
    if not family.in_domain(theta):
        raise DomainError(f"parameter {theta.tolist()} is outside the domain of {family.name!r}.")
    return theta


def _multinomial_loglik(family, counts, theta):
    f = family.probs(theta)
    n = counts.sum()
    const = gammaln(n + 1) - gammaln(counts + 1).sum()
    with np.errstate(divide="ignore"):
        return float(const + xlogy(counts, f).sum())


def log_likelihood(family, data, theta):
    """Sum of log-densities of ``data`` at ``theta``.

    For multinomial families ``data`` are cell counts and the result is the
    full multinomial log-pmf, including ``log n! - sum log x_t!``.  A density
    of exactly zero at some observation yields ``-inf`` rather than an error.
    """
    theta = check_domain(family, theta)
    x = _values(data)
    if family.discrete:
        return _multinomial_loglik(family, x, theta)
    with np.errstate(divide="ignore"):
        return float(np.sum(family.log_density(x, theta)))


def sample(family, theta, n, seed):
    """Draw a reproducible :class:`Sample` of size ``n`` at ``theta``."""
    n = check_count(n, "n", minimum=1)
    theta = check_domain(family, theta)
    rng = np.random.default_rng(seed)
    values = np.asarray(family.sampler(theta, n, rng))
    meta = {"family": family.name, "theta": theta.tolist(), "seed": seed}
    return Sample(values=values, n=n, meta=meta)


def _fd_gradient(func, theta):
    h = fd_step(theta)
    grad = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h[k]
        grad[k] = (func(theta + e) - func(theta - e)) / (2 * h[k])
    return grad


def _loglik_unchecked(family, x, theta):
    if family.discrete:
        return _multinomial_loglik(family, x, theta)
    return float(np.sum(family.log_density(x, theta)))


def _score_unchecked(family, x, theta):
    if family.analytic_score is not None:
        return np.asarray(family.analytic_score(x, theta), dtype=float).reshape(family.param_dim)
    return _fd_gradient(lambda t: _loglik_unchecked(family, x, t), theta)


def score(family, data, theta):
    """Gradient of :func:`log_likelihood` with respect to ``theta``.

    Uses the family's analytic score when available, otherwise central
    finite differences (see :func:`fd_step`).
    """
    theta = check_domain(family, theta)
    return _score_unchecked(family, _values(data), theta)


def hessian(family, data, theta):
    """Second derivative matrix of :func:`log_likelihood`."""
    theta = check_domain(family, theta)
    x = _values(data)
    if family.analytic_hessian is not None:
        H = np.asarray(family.analytic_hessian(x, theta), dtype=float)
        return H.reshape(family.param_dim, family.param_dim)
    d = family.param_dim
    h = fd_step(theta)
    H = np.empty((d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h[k]
        H[k] = (_score_unchecked(family, x, theta + e) - _score_unchecked(family, x, theta - e)) / (2 * h[k])
    return 0.5 * (H + H.T)


# -- continuous families ------------------------------------------------------

_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


def normal_location(sigma=1.0):
    """Normal location family with known standard deviation ``sigma``."""
    sigma = float(sigma)
    var = sigma * sigma

    def log_density(x, theta):
        return -_LOG_SQRT_2PI - np.log(sigma) - (x - theta[0]) ** 2 / (2 * var)

    return ParametricFamily(
        name="normal-loc",
        param_dim=1,
        param_domain=((-np.inf, np.inf),),
        param_names=("mu",),
        log_density=log_density,
        sampler=lambda theta, n, rng: rng.normal(theta[0], sigma, size=n),
        analytic_score=lambda x, theta: np.array([np.sum(x - theta[0]) / var]),
        analytic_hessian=lambda x, theta: np.array([[-x.size / var]]),
        analytic_information=lambda theta: np.array([[1.0 / var]]),
        initial_guess=lambda x: np.array([np.mean(x)]),
        quad_hint=lambda theta: (theta[0], sigma),
    )


def normal_location_scale():
    """Normal family in ``(mu, sigma)``."""

    def log_density(x, theta):
        mu, s = theta
        return -_LOG_SQRT_2PI - np.log(s) - (x - mu) ** 2 / (2 * s * s)

    def analytic_score(x, theta):
        mu, s = theta
        r = x - mu
        return np.array([np.sum(r) / s**2, np.sum(-1.0 / s + r**2 / s**3)])

    def analytic_hessian(x, theta):
        mu, s = theta
        r = x - mu
        cross = np.sum(-2 * r / s**3)
        return np.array([[-x.size / s**2, cross],
                         [cross, np.sum(1.0 / s**2 - 3 * r**2 / s**4)]])

    return ParametricFamily(
        name="normal",
        param_dim=2,
        param_domain=((-np.inf, np.inf), (0.0, np.inf)),
        param_names=("mu", "sigma"),
        log_density=log_density,
        sampler=lambda theta, n, rng: rng.normal(theta[0], theta[1], size=n),
        analytic_score=analytic_score,
        analytic_hessian=analytic_hessian,
        analytic_information=lambda theta: np.diag([1.0 / theta[1] ** 2, 2.0 / theta[1] ** 2]),
        initial_guess=lambda x: np.array([np.mean(x), max(np.std(x), 1e-8)]),
        quad_hint=lambda theta: (theta[0], theta[1]),
    )


def cauchy_location():
    """Cauchy location family, density ``1 / (pi * (1 + (x - m)**2))``.

    The sampler is the exact inverse CDF ``m + tan(pi * (u - 1/2))``.
    """

    def log_density(x, theta):
        return -np.log(np.pi) - np.log1p((x - theta[0]) ** 2)

    def analytic_score(x, theta):
        u = x - theta[0]
        return np.array([np.sum(2 * u / (1 + u * u))])

    def analytic_hessian(x, theta):
        u2 = (x - theta[0]) ** 2
        return np.array([[np.sum(-2 * (1 - u2) / (1 + u2) ** 2)]])

    return ParametricFamily(
        name="cauchy",
        param_dim=1,
        param_domain=((-np.inf, np.inf),),
        param_names=("m",),
        log_density=log_density,
        sampler=lambda theta, n, rng: theta[0] + np.tan(np.pi * (rng.random(n) - 0.5)),
        analytic_score=analytic_score,
        analytic_hessian=analytic_hessian,
        analytic_information=lambda theta: np.array([[0.5]]),
        initial_guess=lambda x: np.array([np.median(x)]),
        multimodal=True,
        quad_hint=lambda theta: (theta[0], 1.0),
    )


def gamma_shape():
    """Gamma family with unknown shape ``k`` and scale fixed at 1."""

    def log_density(x, theta):
        k = theta[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = xlogy(k - 1, x) - x - gammaln(k)
        return np.where(x > 0, out, -np.inf)

    return ParametricFamily(
        name="gamma-shape",
        param_dim=1,
        param_domain=((0.0, np.inf),),
        param_names=("k",),
        support=(0.0, np.inf),
        log_density=log_density,
        sampler=lambda theta, n, rng: rng.gamma(theta[0], 1.0, size=n),
        analytic_score=lambda x, theta: np.array([np.sum(np.log(x)) - x.size * digamma(theta[0])]),
        analytic_hessian=lambda x, theta: np.array([[-x.size * polygamma(1, theta[0])]]),
        analytic_information=lambda theta: np.array([[polygamma(1, theta[0])]]),
        initial_guess=lambda x: np.array([max(np.mean(x), 1e-8)]),
        quad_hint=lambda theta: (0.0, max(theta[0], 1.0)),
    )


# -- multinomial families -----------------------------------------------------

def multinomial_family(name, n_cells, cell_probs, cell_prob_derivs, cell_prob_second_derivs=None,
                       param_dim=1, param_domain=((0.0, 1.0),), constraint=None, param_names=("p",)):
    """Build a :class:`MultinomialFamily` from cell-probability functions."""

    def probs(theta):
        return np.asarray(cell_probs(theta), dtype=float)

    def derivs(theta):
        return np.asarray(cell_prob_derivs(theta), dtype=float).reshape(param_dim, n_cells)

    def log_density(cells, theta):
        with np.errstate(divide="ignore"):
            return np.log(probs(theta))[np.asarray(cells, dtype=int)]

    def analytic_score(counts, theta):
        f = probs(theta)
        return derivs(theta) @ (counts / f)

    def sampler(theta, n, rng):
        return rng.multinomial(n, probs(theta)).astype(float)

    def initial_guess(counts):
        # coarse scan of the domain; good enough to land in the basin of a 1-D optimum
        if param_dim != 1:
            return None
        low, high = param_domain[0]
        grid = low + (high - low) * (np.arange(1, 100) / 100.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = [xlogy(counts, probs(np.array([g]))).sum() for g in grid]
        return np.array([grid[int(np.nanargmax(values))]])

    fam = MultinomialFamily(
        name=name,
        param_dim=param_dim,
        param_domain=tuple(param_domain),
        param_names=tuple(param_names),
        n_cells=n_cells,
        cell_probs=probs,
        cell_prob_derivs=derivs,
        cell_prob_second_derivs=cell_prob_second_derivs,
        log_density=log_density,
        sampler=sampler,
        analytic_score=analytic_score,
        initial_guess=initial_guess,
        constraint=constraint,
    )

    def analytic_hessian(counts, theta):
        f = probs(theta)
        d1 = derivs(theta)
        d2 = fam.second_derivs(theta)
        return np.einsum("ijt,t->ij", d2, counts / f) - np.einsum("it,jt,t->ij", d1, d1, counts / f**2)

    def analytic_information(theta):
        f = probs(theta)
        d1 = derivs(theta)
        return np.einsum("it,jt,t->ij", d1, d1, 1.0 / f)

    object.__setattr__(fam, "analytic_hessian", analytic_hessian)
    object.__setattr__(fam, "analytic_information", analytic_information)
    return fam


def binomial():
    """Two cells with probabilities ``(p, 1 - p)``."""
    return multinomial_family(
        "binomial", 2,
        lambda t: np.array([t[0], 1 - t[0]]),
        lambda t: np.array([[1.0, -1.0]]),
        lambda t: np.zeros((1, 1, 2)),
    )


def hardy_weinberg():
    """Hardy-Weinberg trinomial ``(p**2, 2p(1-p), (1-p)**2)``."""
    return multinomial_family(
        "hardy-weinberg", 3,
        lambda t: np.array([t[0] ** 2, 2 * t[0] * (1 - t[0]), (1 - t[0]) ** 2]),
        lambda t: np.array([[2 * t[0], 2 - 4 * t[0], -2 * (1 - t[0])]]),
        lambda t: np.array([[[2.0, -4.0, 2.0]]]),
    )


def linkage():
    """Four-cell genetic linkage model ``((2+t)/4, (1-t)/4, (1-t)/4, t/4)``."""
    return multinomial_family(
        "linkage", 4,
        lambda t: np.array([(2 + t[0]) / 4, (1 - t[0]) / 4, (1 - t[0]) / 4, t[0] / 4]),
        lambda t: np.array([[0.25, -0.25, -0.25, 0.25]]),
        lambda t: np.zeros((1, 1, 4)),
    )


def simplex_multinomial(n_cells):
    """Unrestricted multinomial: ``theta`` holds the first ``s - 1`` cell probabilities."""
    n_cells = check_count(n_cells, "n_cells", minimum=2)
    d = n_cells - 1
    jac = np.hstack([np.eye(d), -np.ones((d, 1))])
    fam = multinomial_family(
        f"simplex-{n_cells}", n_cells,
        lambda t: np.append(t, 1.0 - np.sum(t)),
        lambda t: jac,
        lambda t: np.zeros((d, d, n_cells)),
        param_dim=d,
        param_domain=((0.0, 1.0),) * d,
        constraint=lambda t: np.sum(t) < 1.0,
        param_names=tuple(f"p{i + 1}" for i in range(d)),
    )
    # smoothed relative frequencies: always interior, and one Newton step from the answer
    object.__setattr__(fam, "initial_guess", lambda counts: ((counts + 0.5) / (counts.sum() + 0.5 * n_cells))[:d])
    return fam


# -- normal mixture -----------------------------------------------------------

def _mixture_log_terms(x, theta):
    w, m1, s1, m2, s2 = theta
    with np.errstate(divide="ignore"):
        a = np.log(w) - _LOG_SQRT_2PI - np.log(s1) - (x - m1) ** 2 / (2 * s1 * s1)
        b = np.log1p(-w) - _LOG_SQRT_2PI - np.log(s2) - (x - m2) ** 2 / (2 * s2 * s2)
    return a, b


def _mixture_log_density(x, theta):
    return np.logaddexp(*_mixture_log_terms(x, theta))


def _mixture_score(x, theta):
    w, m1, s1, m2, s2 = theta
    a, b = _mixture_log_terms(x, theta)
    r1 = np.exp(a - np.logaddexp(a, b))
    r2 = 1.0 - r1
    z1 = (x - m1) / s1
    z2 = (x - m2) / s2
    return np.array([
        np.sum(r1 / w - r2 / (1 - w)),
        np.sum(r1 * z1 / s1),
        np.sum(r1 * (z1 * z1 - 1) / s1),
        np.sum(r2 * z2 / s2),
        np.sum(r2 * (z2 * z2 - 1) / s2),
    ])


def _mixture_sampler(theta, n, rng):
    w, m1, s1, m2, s2 = theta
    first = rng.random(n) < w
    return np.where(first, rng.normal(m1, s1, size=n), rng.normal(m2, s2, size=n))


def normal_mixture():
    """Two-component normal mixture in ``(w, mu1, sigma1, mu2, sigma2)``."""

    def initial_guess(x):
        q1, q3 = np.quantile(x, [0.25, 0.75])
        s = max(np.std(x) / 2, 1e-8)
        return np.array([0.5, q1, s, q3, s])

    return ParametricFamily(
        name="mixture",
        param_dim=5,
        param_domain=((0.0, 1.0), (-np.inf, np.inf), (0.0, np.inf), (-np.inf, np.inf), (0.0, np.inf)),
        param_names=("w", "mu1", "sigma1", "mu2", "sigma2"),
        log_density=_mixture_log_density,
        sampler=_mixture_sampler,
        analytic_score=_mixture_score,
        initial_guess=initial_guess,
        multimodal=True,
        quad_hint=lambda theta: (theta[0] * theta[1] + (1 - theta[0]) * theta[3],
                                 max(theta[2], theta[4], abs(theta[1] - theta[3]))),
    )


# -- Neyman-Scott paired array ------------------------------------------------

def neyman_scott(n_pairs):
    """Paired design ``x_ij ~ N(mu_j, sigma2)``, ``i = 1, 2``, ``j = 1..J``.

    ``theta = (mu_1, ..., mu_J, sigma2)``.  An observation is one pair, so
    ``log_density`` maps a ``(J, 2)`` array to ``J`` pair log-densities.
    """
    J = check_count(n_pairs, "n_pairs", minimum=1)

    def log_density(x, theta):
        x = np.asarray(x, dtype=float).reshape(J, 2)
        mu, v = theta[:J], theta[J]
        ss = (x[:, 0] - mu) ** 2 + (x[:, 1] - mu) ** 2
        return -np.log(2 * np.pi * v) - ss / (2 * v)

    def analytic_score(x, theta):
        x = np.asarray(x, dtype=float).reshape(J, 2)
        mu, v = theta[:J], theta[J]
        ss = (x[:, 0] - mu) ** 2 + (x[:, 1] - mu) ** 2
        return np.append((x[:, 0] + x[:, 1] - 2 * mu) / v, np.sum(-1.0 / v + ss / (2 * v * v)))

    def sampler(theta, n, rng):
        if n != J:
            raise ValueError(f"neyman-scott family with J={J} pairs cannot draw n={n}.")
        mu, v = theta[:J], theta[J]
        return mu[:, None] + np.sqrt(v) * rng.standard_normal((J, 2))

    def initial_guess(x):
        x = np.asarray(x, dtype=float).reshape(J, 2)
        return np.append(x.mean(axis=1), max(np.mean((x[:, 0] - x[:, 1]) ** 2) / 4, 1e-8))

    return ParametricFamily(
        name="neyman-scott",
        param_dim=J + 1,
        param_domain=((-np.inf, np.inf),) * J + ((0.0, np.inf),),
        param_names=tuple(f"mu{j + 1}" for j in range(J)) + ("sigma2",),
        log_density=log_density,
        sampler=sampler,
        analytic_score=analytic_score,
        initial_guess=initial_guess,
    )


_REGISTRY = {
    "normal-loc": normal_location,
    "normal": normal_location_scale,
    "cauchy": cauchy_location,
    "gamma-shape": gamma_shape,
    "binomial": binomial,
    "hardy-weinberg": hardy_weinberg,
    "linkage": linkage,
    "simplex": simplex_multinomial,
    "mixture": normal_mixture,
    "neyman-scott": neyman_scott,
}

FAMILY_NAMES = tuple(_REGISTRY)


def get_family(name, **kwargs):
    """Look up a family by registry name, e.g. ``get_family("neyman-scott", n_pairs=3)``."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {', '.join(FAMILY_NAMES)}") from None
    if name == "simplex" and not kwargs:
        kwargs = {"n_cells": 3}
    if name == "neyman-scott" and not kwargs:
        kwargs = {"n_pairs": 1}
    return factory(**kwargs)

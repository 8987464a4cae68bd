"""Fisher information in its equivalent forms, and exact variance decompositions.

Continuous expectations are computed by adaptive quadrature after a tangent
substitution ``x = c + s * tan(u)`` that maps infinite ranges onto finite
ones.  Discrete (multinomial) expectations are exact sums, either over cells
or over every possible count vector of a sample of size ``n``.

:func:`anova_decomposition` enumerates every ordered sample of size ``n``
from a finite family and splits the variance of the score into the part
explained by a statistic ``T`` and the residual part.  Outcomes are grouped by
exact equality of ``T``, so statistics should return values that compare
equal bit-for-bit when they are mathematically equal (integers, or the same
arithmetic applied to equal integers).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad_vec
from scipy.special import gammaln

from . import families as fam_mod
from ._validation import check_count
from .exceptions import SampleSpaceTooLarge
from .families import MultinomialFamily, check_domain

__all__ = [
    "InformationReport",
    "AnovaDecomposition",
    "InequalityReport",
    "QUADRATURE_EPSABS",
    "REGULAR_FAMILIES",
    "expectation",
    "per_observation_information",
    "expected_information",
    "observed_information",
    "anova_decomposition",
    "information_inequality_report",
    "cell_count",
]

QUADRATURE_EPSABS = 1e-9
MAX_OUTCOMES = 10**7
MAX_COMPOSITIONS = 2 * 10**6
REGULAR_FAMILIES = ("normal-loc", "normal", "cauchy", "gamma-shape", "binomial", "hardy-weinberg",
                    "linkage", "simplex")


@dataclass
class InformationReport:
    """The equivalent expressions for the information in a sample of size ``n``.

    ``I_neg_hessian`` and ``I_score_sq`` are sample-level expectations of
    the log-likelihood of all ``n`` observations; ``I_per_obs_n`` and
    ``I_per_obs_score_n`` are the single-observation versions times ``n``.
    """

    n: int
    I_neg_hessian: np.ndarray
    I_score_sq: np.ndarray
    I_per_obs_n: np.ndarray
    I_per_obs_score_n: np.ndarray
    max_pairwise_discrepancy: float
    mean_score: np.ndarray
    total_probability: float
    analytic: Optional[np.ndarray]
    analytic_discrepancy: Optional[float]
    achieved_tolerance: float
    flagged: bool
    method: str


@dataclass
class AnovaDecomposition:
    var_X: float
    e_var_X_given_T: float
    var_e_X_given_T: float
    reciprocal_V: float
    identity_residual: float
    mean_X: float
    var_T: float
    n_outcomes: int
    n_groups: int


@dataclass
class InequalityReport:
    """Exact comparison of ``Var(T)`` with the information bound.

    ``inequality_holds`` is ``None`` for a biased statistic: the plain bound
    ``1/I`` only applies to unbiased estimators, so nothing is claimed.  The
    bias-corrected bound ``(dE[T]/dtheta)**2 / I`` is always reported; its
    derivative is computed exactly as ``E[T X]`` with ``X`` the score.
    """

    mean_T: float
    bias: float
    var_T: float
    information: float
    bound: float
    slack: float
    mean_derivative: float
    corrected_bound: float
    corrected_slack: float
    unbiased: bool
    inequality_holds: Optional[bool]


def _relative_gap(a, b):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)


def _mapped_integral(family, theta, integrand):
    """Integrate ``integrand(x) * f(x; theta)`` over the support; returns (value, abserr, warned)."""
    lo, hi = family.support
    center, scale = family.quad_hint(theta) if family.quad_hint is not None else (0.0, 1.0)

    if np.isinf(lo) and np.isinf(hi):
        a, b = -np.pi / 2, np.pi / 2

        def x_of(u):
            return center + scale * np.tan(u)
    elif np.isinf(hi):
        a, b = 0.0, np.pi / 2

        def x_of(u):
            return lo + scale * np.tan(u)
    else:
        a, b = lo, hi

        def x_of(u):
            return u

    finite = np.isfinite(lo) and np.isfinite(hi)

    def mapped(u):
        x = x_of(u)
        jac = 1.0 if finite else scale / np.cos(u) ** 2
        dens = np.exp(family.log_density(np.array([x]), theta)[0])
        if dens == 0.0 or not np.isfinite(jac):
            return np.zeros_like(integrand_shape)
        return integrand(x) * dens * jac

    integrand_shape = np.asarray(integrand(x_of(0.5 * (a + b))), dtype=float)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, err = quad_vec(mapped, a, b, epsabs=QUADRATURE_EPSABS, epsrel=1e-12, norm="max", limit=4000)
    warned = any(issubclass(w.category, IntegrationWarning) for w in caught)
    return np.asarray(value, dtype=float), float(err), warned


def _score_obs(family, x, theta):
    return fam_mod._score_unchecked(family, np.array([x]), theta)


def _hessian_obs(family, x, theta):
    return fam_mod.hessian(family, np.array([x]), theta)


def expectation(family, theta, func):
    """``E[func(X)]`` for a single observation by quadrature or cell summation.

    Returns ``(value, achieved_abserr)``.
    """
    theta = check_domain(family, theta)
    if family.discrete:
        f = family.probs(theta)
        vals = np.array([np.asarray(func(t), dtype=float) for t in range(family.n_cells)])
        return np.tensordot(f, vals, axes=1), 0.0
    value, err, _ = _mapped_integral(family, theta, lambda x: np.asarray(func(x), dtype=float))
    return value, err


def _per_obs_moments(family, theta):
    """Per-observation total probability, E[s], E[s s^T], -E[H] and quadrature error."""
    d = family.param_dim
    if family.discrete:
        f = family.probs(theta)
        d1 = family.derivs(theta)
        d2 = family.second_derivs(theta)
        s = d1 / f                                         # (d, s): score of each cell
        H = d2 / f - np.einsum("it,jt->ijt", d1, d1) / f**2
        return (float(f.sum()), s @ f, np.einsum("it,jt,t->ij", s, s, f),
                -np.tensordot(H, f, axes=([2], [0])), 0.0, False)

    def integrand(x):
        sc = _score_obs(family, x, theta)
        H = _hessian_obs(family, x, theta)
        return np.concatenate([[1.0], sc, np.outer(sc, sc).ravel(), -H.ravel()])

    value, err, warned = _mapped_integral(family, theta, integrand)
    total = value[0]
    mean_s = value[1:1 + d]
    ss = value[1 + d:1 + d + d * d].reshape(d, d)
    negH = value[1 + d + d * d:].reshape(d, d)
    return float(total), mean_s, ss, negH, err, warned


def per_observation_information(family, theta, form="score"):
    """Per-observation expected information matrix, ``E[s s^T]`` or ``-E[H]``."""
    theta = check_domain(family, theta)
    _, _, ss, negH, _, _ = _per_obs_moments(family, theta)
    return ss if form == "score" else negH


def _compositions(n, s):
    if s == 1:
        return np.array([[n]])
    blocks = []
    for k in range(n, -1, -1):
        rest = _compositions(n - k, s - 1)
        blocks.append(np.column_stack([np.full(rest.shape[0], k), rest]))
    return np.vstack(blocks)


def _sample_level_discrete(family, theta, n):
    f = family.probs(theta)
    d1 = family.derivs(theta)
    d2 = family.second_derivs(theta)
    counts = _compositions(n, family.n_cells).astype(float)
    with np.errstate(divide="ignore"):
        logp = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + (counts * np.log(f)).sum(axis=1)
    p = np.exp(logp)
    S = (counts / f) @ d1.T                                   # (N, d)
    H = (np.einsum("ijt,nt->nij", d2, counts / f) - np.einsum("it,jt,nt->nij", d1, d1, counts / f**2))
    return np.einsum("n,ni,nj->ij", p, S, S), -np.einsum("n,nij->ij", p, H)


def expected_information(family, theta, n=1):
    """All forms of the expected information for ``n`` observations.

    Continuous families use quadrature (absolute tolerance 1e-9); the
    sample-level forms follow from independence, ``E[X X^T] = n E[s s^T] +
    n(n-1) E[s] E[s]^T`` and ``-E[d2 log phi] = -n E[H]``.  Multinomial
    families sum exactly over every count vector of size ``n`` when there are
    at most two million of them, and over cells otherwise.
    """
    theta = check_domain(family, theta)
    n = check_count(n, "n")
    total, mean_s, ss, negH, err, warned = _per_obs_moments(family, theta)
    per_score = n * ss
    per_hess = n * negH
    method = "quadrature"
    if family.discrete:
        method = "summation"
        if math.comb(n + family.n_cells - 1, family.n_cells - 1) <= MAX_COMPOSITIONS:
            sample_score, sample_hess = _sample_level_discrete(family, theta, n)
            method = "enumeration"
        else:
            sample_score = n * ss + n * (n - 1) * np.outer(mean_s, mean_s)
            sample_hess = n * negH
    else:
        sample_score = n * ss + n * (n - 1) * np.outer(mean_s, mean_s)
        sample_hess = n * negH
    forms = [sample_hess, sample_score, per_hess, per_score]
    gap = max(_relative_gap(a, b) for i, a in enumerate(forms) for b in forms[i + 1:])
    analytic = gap_a = None
    if family.analytic_information is not None:
        analytic = n * np.asarray(family.analytic_information(theta), dtype=float)
        gap_a = max(_relative_gap(a, analytic) for a in forms)
    return InformationReport(
        n=n,
        I_neg_hessian=sample_hess,
        I_score_sq=sample_score,
        I_per_obs_n=per_hess,
        I_per_obs_score_n=per_score,
        max_pairwise_discrepancy=gap,
        mean_score=mean_s,
        total_probability=total,
        analytic=analytic,
        analytic_discrepancy=gap_a,
        achieved_tolerance=err,
        flagged=bool(warned or err > 10 * QUADRATURE_EPSABS),
        method=method,
    )


def observed_information(family, data, theta):
    """``-d2 loglik / dtheta2`` at ``theta`` (analytic or finite differences of the score)."""
    return -fam_mod.hessian(family, data, theta)


# -- exact enumeration --------------------------------------------------------

def cell_count(cell, positions=None):
    """Statistic counting how often ``cell`` occurs (optionally within ``positions``)."""
    def statistic(outcomes):
        sub = outcomes if positions is None else outcomes[:, positions]
        return (sub == cell).sum(axis=1).astype(float)
    return statistic


def _enumerate(model, n, theta, statistic, max_outcomes, block=1 << 18):
    if not isinstance(model, MultinomialFamily) or model.param_dim != 1:
        raise TypeError("enumeration needs a one-parameter MultinomialFamily")
    theta = check_domain(model, theta)
    n = check_count(n, "n")
    s = model.n_cells
    total = s**n
    if total > max_outcomes:
        raise SampleSpaceTooLarge(f"{s}**{n} = {total} outcomes exceeds the limit of {max_outcomes}")
    f = model.probs(theta)
    logf = np.log(f)
    cell_score = model.derivs(theta)[0] / f
    powers = s ** np.arange(n - 1, -1, -1)
    P, X, T = np.empty(total), np.empty(total), np.empty(total)
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total))
        outcomes = ((idx[:, None] // powers) % s).astype(np.int64)
        P[idx] = np.exp(logf[outcomes].sum(axis=1))
        X[idx] = cell_score[outcomes].sum(axis=1)
        T[idx] = np.asarray(statistic(outcomes), dtype=float)
    return P, X, T


def anova_decomposition(model, n, statistic, theta, max_outcomes=MAX_OUTCOMES):
    """Exact split ``Var(X) = E[Var(X|T)] + Var(E[X|T])`` of the sample score ``X``.

    Parameters
    ----------
    model : MultinomialFamily
        One-parameter family; a single observation is a cell index.
    n : int
        Sample size; all ``s**n`` ordered samples are enumerated.
    statistic : callable
        Maps an ``(m, n)`` integer array of outcomes to ``m`` values of ``T``.
    theta : float or array-like
    max_outcomes : int
        Guard on ``s**n``.
    """
    P, X, T = _enumerate(model, n, theta, statistic, max_outcomes)
    mean_X = float(P @ X)
    var_X = float(P @ (X - mean_X) ** 2)
    _, inv = np.unique(T, return_inverse=True)
    Pg = np.bincount(inv, weights=P)
    mg = np.bincount(inv, weights=P * X) / Pg
    e_var = float(np.sum(np.bincount(inv, weights=P * (X - mg[inv]) ** 2)))
    var_e = float(Pg @ (mg - mean_X) ** 2)
    mean_T = float(P @ T)
    var_T = float(P @ (T - mean_T) ** 2)
    return AnovaDecomposition(
        var_X=var_X,
        e_var_X_given_T=e_var,
        var_e_X_given_T=var_e,
        reciprocal_V=1.0 / var_T if var_T > 0 else np.inf,
        identity_residual=var_X - e_var - var_e,
        mean_X=mean_X,
        var_T=var_T,
        n_outcomes=P.size,
        n_groups=Pg.size,
    )


def information_inequality_report(model, n, statistic, theta, max_outcomes=MAX_OUTCOMES, unbiased_tol=1e-12):
    """Exact ``Var(T)`` against ``1/I(theta)`` by enumeration (see :class:`InequalityReport`)."""
    P, X, T = _enumerate(model, n, theta, statistic, max_outcomes)
    theta0 = float(np.atleast_1d(theta)[0])
    info = float(P @ X**2 - (P @ X) ** 2)
    mean_T = float(P @ T)
    var_T = float(P @ (T - mean_T) ** 2)
    deriv = float(P @ (T * X))
    bias = mean_T - theta0
    unbiased = abs(bias) <= unbiased_tol * max(1.0, abs(theta0)) and abs(deriv - 1.0) <= 1e-9
    bound = 1.0 / info
    corrected = deriv**2 / info
    slack = var_T - bound
    return InequalityReport(
        mean_T=mean_T,
        bias=bias,
        var_T=var_T,
        information=info,
        bound=bound,
        slack=slack,
        mean_derivative=deriv,
        corrected_bound=corrected,
        corrected_slack=var_T - corrected,
        unbiased=unbiased,
        inequality_holds=(slack >= -1e-12 * max(1.0, bound)) if unbiased else None,
    )

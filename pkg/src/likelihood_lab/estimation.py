"""Maximum likelihood fitting and the estimators it is compared against.

All iterative fits share one safeguarded Newton ascent: a Newton step when the
Hessian is negative definite, a shifted (Levenberg-type) step otherwise, and
step halving until the objective does not decrease.  One-dimensional problems
that stall fall back to bracketing the score root with Brent's method.
Convergence is declared when the per-observation gradient norm falls below
``SolverConfig.tolerance``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize

from . import families as fam_mod
from ._validation import check_count, check_counts, check_pairs, check_positive, check_sample_1d
from .families import MultinomialFamily, check_domain, fd_step, normal_mixture

__all__ = [
    "SolverConfig",
    "FitResult",
    "NeymanScottFit",
    "mle_fit",
    "hodges_estimate",
    "method_of_moments",
    "min_chisquare_fit",
    "chi_square",
    "neyman_scott_mle",
    "mixture_profile_supremum",
    "constrained_mixture_mle",
]

EPS = np.finfo(float).eps
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by the iterative fits.

    ``tolerance`` bounds the gradient norm divided by the number of
    observations, i.e. the score of the average log-likelihood.
    """

    tolerance: float = 1e-10
    max_iterations: int = 200
    multistart_grid: int = 25

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        check_count(self.max_iterations, "max_iterations")
        check_count(self.multistart_grid, "multistart_grid")


@dataclass
class FitResult:
    estimate: np.ndarray
    converged: bool
    iterations: int
    final_score_norm: float
    observed_information: np.ndarray
    std_error: np.ndarray
    log_likelihood: float
    message: str = ""
    extra: dict = field(default_factory=dict)


class NeymanScottFit(NamedTuple):
    means: np.ndarray
    sigma2: float
    degenerate: bool


def _std_error(info):
    info = np.atleast_2d(info)
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return np.full(info.shape[0], np.nan)
    return np.sqrt(np.diag(np.linalg.inv(info)))


class _Ascent(NamedTuple):
    theta: np.ndarray
    value: float
    grad: np.ndarray
    converged: bool
    iterations: int


def _ascend(fun, grad, hess, start, feasible, config, scale, step_scale=1.0):
    """Safeguarded Newton ascent; never accepts a decrease beyond rounding.

    ``scale`` is the number of observations; the objective is a sum of that
    many terms, so its rounding noise is of order ``EPS * (|value| + scale)``
    even when the sum itself is small.
    """
    theta = np.array(start, dtype=float)
    value = fun(theta)
    g = grad(theta)
    it = 0
    for it in range(config.max_iterations):
        gnorm = np.linalg.norm(g)
        if gnorm / scale <= config.tolerance:
            return _Ascent(theta, value, g, True, it)
        H = hess(theta)
        eig = np.linalg.eigvalsh(H)
        if eig.max() < 0:
            step = np.linalg.solve(-H, g)
        else:
            shift = eig.max() + gnorm / step_scale
            step = np.linalg.solve(shift * np.eye(theta.size) - H, g)
        t = 1.0
        accepted = False
        for _ in range(64):
            cand = theta + t * step
            if feasible(cand):
                v = fun(cand)
                if v > value:
                    accepted = True
                elif v >= value - 8 * EPS * (abs(value) + scale):
                    gc = grad(cand)
                    accepted = np.linalg.norm(gc) < gnorm
                if accepted:
                    break
            t *= 0.5
        if not accepted:
            break
        theta, value = cand, v
        g = grad(theta)
    gnorm = np.linalg.norm(g)
    return _Ascent(theta, value, g, gnorm / scale <= config.tolerance, it + 1)


def _bracket_root_1d(fun, grad, result, feasible, config, scale, step_scale):
    """Brent fallback for a stalled 1-D ascent: bracket the score root uphill."""
    theta = result.theta
    g0 = result.grad[0]
    if g0 == 0 or not np.isfinite(g0):
        return result
    direction = np.sign(g0)
    width = step_scale
    b = None
    for _ in range(80):
        cand = theta + direction * width
        if not feasible(cand):
            width *= 0.5
            continue
        if np.sign(grad(cand)[0]) != direction:
            b = cand
            break
        width *= 2.0
    if b is None:
        return result
    lo, hi = sorted([theta[0], b[0]])
    try:
        root = brentq(lambda t: grad(np.array([t]))[0], lo, hi, xtol=4 * EPS * max(1.0, abs(lo)), rtol=4 * EPS,
                      maxiter=config.max_iterations)
    except (ValueError, RuntimeError):
        return result
    cand = np.array([root])
    value = fun(cand)
    if value < result.value - 8 * EPS * (abs(result.value) + scale):
        return result
    g = grad(cand)
    return _Ascent(cand, value, g, np.linalg.norm(g) / scale <= config.tolerance, result.iterations)


def _best(results):
    """Highest objective wins; near-ties go to the lexicographically smallest point."""
    top = max(r.value for r in results)
    tied = [r for r in results if r.value >= top - _TIE_RTOL * max(1.0, abs(top))]
    return min(tied, key=lambda r: tuple(r.theta))


def _finish(family, x, best, message=""):
    H = fam_mod.hessian(family, x, best.theta) if family.in_domain(best.theta) else np.full((family.param_dim,) * 2, np.nan)
    info = -H
    n = _n_obs(family, x)
    return FitResult(
        estimate=best.theta,
        converged=bool(best.converged),
        iterations=best.iterations,
        final_score_norm=float(np.linalg.norm(best.grad) / n),
        observed_information=info,
        std_error=_std_error(info),
        log_likelihood=float(best.value),
        message=message or ("converged" if best.converged else "no interior stationary point found"),
    )


def _n_obs(family, x):
    if family.discrete:
        return float(np.sum(x))
    return float(x.shape[0])


def _data_scale(family, x):
    if family.discrete:
        return 0.1
    spread = float(np.ptp(x))
    return spread if spread > 0 else 1.0


def _starts(family, x, config, start):
    if start is not None:
        return [check_domain(family, start)]
    guess = family.initial_guess(x) if family.initial_guess is not None else None
    starts = []
    if family.multimodal and family.param_dim == 1:
        lo, hi = float(np.min(x)), float(np.max(x))
        starts.extend(np.array([t]) for t in np.linspace(lo, hi, config.multistart_grid))
    if guess is not None and family.in_domain(guess):
        starts.append(np.asarray(guess, dtype=float))
    if not starts:
        mid = [0.5 * (lo + hi) if np.isfinite(lo) and np.isfinite(hi) else (lo + 1 if np.isfinite(lo) else 0.0)
               for lo, hi in family.param_domain]
        starts.append(np.array(mid, dtype=float))
    return starts


def mle_fit(family, data, config=None, start=None):
    """Maximise the log-likelihood by solving ``score = 0``.

    Parameters
    ----------
    family : ParametricFamily
    data : Sample or array-like
        Observations (cell counts for multinomial families).
    config : SolverConfig, optional
    start : array-like, optional
        Single starting point; overrides the family's starting strategy.

    Returns
    -------
    FitResult
        ``converged`` is False when no interior stationary point was reached
        (for example binomial counts ``(n, 0)`` whose maximum sits on the
        boundary); the returned estimate is then the best point visited.

    Notes
    -----
    Multimodal one-parameter families (Cauchy) are started from
    ``config.multistart_grid`` equispaced points on ``[min(x), max(x)]`` plus
    the data-driven guess.  The normal mixture is delegated to
    :func:`constrained_mixture_mle` with ``sigma_min = 0.01 * std(x)``
    because its unconstrained likelihood is unbounded.
    """
    config = config or SolverConfig()
    x = np.asarray(getattr(data, "values", data), dtype=float)
    if x.size == 0:
        raise ValueError("cannot fit an empty sample")
    if family.discrete:
        x = check_counts(x, family.n_cells)
    if family.name == "mixture":
        x = check_sample_1d(x, min_samples=2)
        return constrained_mixture_mle(x, 0.01 * float(np.std(x)) or 1e-8, config)

    def fun(t):
        return fam_mod._loglik_unchecked(family, x, t)

    def grad(t):
        return fam_mod._score_unchecked(family, x, t)

    def hess(t):
        return fam_mod.hessian(family, x, t)

    n = _n_obs(family, x)
    step_scale = _data_scale(family, x)
    results = []
    for s in _starts(family, x, config, start):
        res = _ascend(fun, grad, hess, s, family.in_domain, config, n, step_scale)
        if not res.converged and family.param_dim == 1:
            res = _bracket_root_1d(fun, grad, res, family.in_domain, config, n, step_scale)
        results.append(res)
    return _finish(family, x, _best(results))


def hodges_estimate(data, alpha):
    """Hodges' shrink-at-zero estimator for a ``N(theta, 1)`` sample.

    Returns the sample mean when ``|mean| >= n**(-1/4)`` and ``alpha * mean``
    otherwise.
    """
    x = check_sample_1d(data)
    alpha = check_positive(alpha, "alpha")
    mean = float(np.mean(x))
    if abs(mean) >= x.size ** -0.25:
        return mean
    return alpha * mean


def method_of_moments(family, data):
    """Moment estimate of the gamma shape (scale fixed at 1): the sample mean."""
    if family.name != "gamma-shape":
        raise ValueError(f"method_of_moments is defined for the gamma-shape family, not {family.name!r}")
    x = check_sample_1d(data, positive=True)
    return np.array([float(np.mean(x))])


def chi_square(family, counts, theta):
    """Pearson statistic ``sum (x_t - n f_t)**2 / (n f_t)``."""
    counts = check_counts(counts, family.n_cells)
    theta = check_domain(family, theta)
    n = counts.sum()
    f = family.probs(theta)
    return float(np.sum((counts - n * f) ** 2 / (n * f)))


def min_chisquare_fit(family, counts, config=None, start=None):
    """Minimum chi-square estimate for a :class:`MultinomialFamily`.

    Uses ``chi2 = sum x_t**2 / (n f_t) - n`` so the gradient and Hessian are
    available in closed form, and the same safeguarded Newton ascent as
    :func:`mle_fit` applied to ``-chi2``.  A minimum on the domain boundary
    leaves ``converged=False`` with an explanatory message.
    """
    if not isinstance(family, MultinomialFamily):
        raise TypeError("min_chisquare_fit requires a MultinomialFamily")
    config = config or SolverConfig()
    x = check_counts(counts, family.n_cells)
    n = x.sum()
    x2 = x * x

    def feasible(t):
        return family.in_domain(t) and np.all(family.probs(t) > 0)

    def fun(t):
        return -(np.sum(x2 / (n * family.probs(t))) - n)

    def grad(t):
        f = family.probs(t)
        return family.derivs(t) @ (x2 / (n * f * f))

    def hess(t):
        f = family.probs(t)
        d1 = family.derivs(t)
        d2 = family.second_derivs(t)
        return (np.einsum("ijt,t->ij", d2, x2 / (n * f * f))
                - 2 * np.einsum("it,jt,t->ij", d1, d1, x2 / (n * f**3)))

    if start is not None:
        starts = [check_domain(family, start)]
    elif family.param_dim == 1:
        lo, hi = family.param_domain[0]
        grid = lo + (hi - lo) * np.arange(1, 100) / 100.0
        starts = [np.array([grid[int(np.argmax([fun(np.array([g])) for g in grid]))]])]
    else:
        starts = [family.initial_guess(x) if family.initial_guess(x) is not None
                  else np.full(family.param_dim, 1.0 / family.n_cells)]
    results = []
    for s in starts:
        res = _ascend(fun, grad, hess, s, feasible, config, n, 0.1)
        if not res.converged and family.param_dim == 1:
            res = _bracket_root_1d(fun, grad, res, feasible, config, n, 0.1)
        results.append(res)
    best = _best(results)
    message = ""
    if not best.converged:
        message = "minimum on or near the domain boundary; no interior stationary point"
    fit = _finish(family, x, _Ascent(best.theta, fam_mod._loglik_unchecked(family, x, best.theta),
                                     best.grad, best.converged, best.iterations), message)
    fit.final_score_norm = float(np.linalg.norm(best.grad) / n)
    fit.extra["chi_square"] = float(-best.value)
    return fit


def neyman_scott_mle(pairs):
    """Closed-form MLE for the paired normal design with a mean per pair.

    ``mu_j = (x_1j + x_2j) / 2`` and ``sigma2 = sum (x_1j - x_2j)**2 / (4 J)``.
    All-identical pairs give ``sigma2 = 0`` with ``degenerate=True``.
    """
    pairs = check_pairs(pairs)
    means = pairs.mean(axis=1)
    d = pairs[:, 0] - pairs[:, 1]
    sigma2 = float(np.sum(d * d) / (4 * pairs.shape[0]))
    return NeymanScottFit(means=means, sigma2=sigma2, degenerate=sigma2 == 0.0)


def mixture_profile_supremum(data, sigma_floors):
    """Mixture log-likelihood along the degenerate path ``mu1 = x_1, sigma1 = floor``.

    The weight is fixed at 1/2 and the second component at the moment
    estimates ``(mean(x), std(x))`` of the whole sample.  Returns a list of
    ``(floor, log_likelihood)`` pairs in the order given.
    """
    x = check_sample_1d(data, min_samples=2)
    if np.unique(x).size < 2:
        raise ValueError("sample must contain at least two distinct values")
    floors = np.asarray(sigma_floors, dtype=float)
    if floors.ndim != 1 or floors.size == 0 or np.any(floors <= 0) or np.any(np.diff(floors) >= 0):
        raise ValueError("sigma_floors must be a strictly decreasing sequence of positive reals")
    family = normal_mixture()
    mean, sd = float(np.mean(x)), float(np.std(x))
    out = []
    for s in floors:
        theta = np.array([0.5, x[0], s, mean, sd])
        out.append((float(s), float(np.sum(family.log_density(x, theta)))))
    return out


_MIXTURE_QUANTILES = ((0.25, 0.75), (0.1, 0.9), (0.05, 0.5), (0.5, 0.95), (0.2, 0.6), (0.4, 0.8), (0.01, 0.99))


def _canonical_mixture(z):
    if z[1] > z[3]:
        return np.array([1 - z[0], z[3], z[4], z[1], z[2]])
    return np.asarray(z, dtype=float)


def constrained_mixture_mle(data, sigma_min, config=None):
    """Best local maximum of the two-normal mixture with ``sigma1, sigma2 >= sigma_min``.

    Each start (pairs of sample quantiles for the means, plus a coincident
    start at the moment estimates) is climbed with L-BFGS-B under the bounds,
    then polished with the safeguarded Newton ascent when the solution is
    interior.  Components are ordered so that ``mu1 <= mu2``.

    A best point sitting on the ``sigma_min`` bound is returned with
    ``converged=False`` and the message says whether every start ended there.
    """
    config = config or SolverConfig()
    x = check_sample_1d(data, min_samples=2)
    sigma_min = check_positive(float(sigma_min), "sigma_min")
    family = normal_mixture()
    n = float(x.size)
    mean, sd = float(np.mean(x)), float(np.std(x))
    sigma0 = max(sd / 2, 1.01 * sigma_min)
    w_lo, w_hi = 1e-9, 1 - 1e-9

    starts = [np.array([0.5, a, sigma0, b, sigma0]) for a, b in
              (np.quantile(x, q) for q in _MIXTURE_QUANTILES)]
    starts.append(np.array([0.5, mean, max(sd, sigma_min), mean, max(sd, sigma_min)]))

    def fun(z):
        return float(np.sum(family.log_density(x, z)))

    def grad(z):
        return family.analytic_score(x, z)

    def hess(z):
        h = fd_step(z)
        H = np.empty((5, 5))
        for k in range(5):
            e = np.zeros(5)
            e[k] = h[k]
            H[k] = (grad(z + e) - grad(z - e)) / (2 * h[k])
        return 0.5 * (H + H.T)

    def feasible(z):
        return w_lo <= z[0] <= w_hi and z[2] >= sigma_min and z[4] >= sigma_min

    bounds = [(w_lo, w_hi), (None, None), (sigma_min, None), (None, None), (sigma_min, None)]
    results = []
    for z0 in starts:
        opt = minimize(lambda z: -fun(z) / n, z0, jac=lambda z: -grad(z) / n, method="L-BFGS-B",
                       bounds=bounds, options={"maxiter": 20 * config.max_iterations, "ftol": 1e-15, "gtol": 1e-12})
        z = _canonical_mixture(np.clip(opt.x, [b[0] if b[0] is not None else -np.inf for b in bounds],
                                       [b[1] if b[1] is not None else np.inf for b in bounds]))
        on_bound = (min(z[2], z[4]) <= sigma_min * (1 + 1e-7)) or not (1e-6 < z[0] < 1 - 1e-6)
        if on_bound:
            results.append((_Ascent(z, fun(z), grad(z), False, int(opt.nit)), True))
            continue
        res = _ascend(fun, grad, hess, z, feasible, config, n, max(sd, sigma_min))
        res = res._replace(theta=_canonical_mixture(res.theta), iterations=res.iterations + int(opt.nit))
        still_interior = min(res.theta[2], res.theta[4]) > sigma_min * (1 + 1e-7)
        results.append((res, not still_interior))
    best = _best([r for r, _ in results])
    best_on_bound = next(b for r, b in results if r is best)
    if best_on_bound:
        all_bound = all(b for _, b in results)
        message = ("all starts hit the sigma_min constraint" if all_bound
                   else "best local maximum lies on the sigma_min constraint")
        best = best._replace(converged=False)
    else:
        message = "converged" if best.converged else "interior polish did not reach tolerance"
    info = -hess(best.theta) if feasible(best.theta) else np.full((5, 5), np.nan)
    return FitResult(
        estimate=best.theta,
        converged=bool(best.converged),
        iterations=best.iterations,
        final_score_norm=float(np.linalg.norm(best.grad) / n),
        observed_information=info,
        std_error=_std_error(info),
        log_likelihood=float(best.value),
        message=message,
        extra={"sigma_min": sigma_min, "n_starts": len(starts),
               "starts_on_constraint": int(sum(b for _, b in results))},
    )

"""Seeded replication harness.

Replicate ``r`` of cell ``c`` in stream ``e`` draws from
``np.random.default_rng([seed, e, c, r])``, so any single replicate can be
reproduced in isolation and cells never share random numbers.  Moments are
accumulated in one pass (Welford updates, Chan merges) in a fixed order, so
summaries are bit-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import estimation
from ._validation import check_count, check_positive
from .families import get_family

__all__ = [
    "EstimatorFailure",
    "MomentAccumulator",
    "ExperimentSpec",
    "CellSummary",
    "ReplicationSummary",
    "ESTIMATORS",
    "replicate",
    "superefficiency_scan",
    "efficient_correlation",
    "sufficiency_correlation_demo",
    "consistency_scan",
    "neyman_scott_scan",
    "neyman_scott_ks",
    "FAILURE_THRESHOLD",
]

FAILURE_THRESHOLD = 0.01


class EstimatorFailure(RuntimeError):
    """An estimator could not produce a value on one replicate."""


class MomentAccumulator:
    """Streaming mean and co-moment matrix for ``k`` jointly observed values.

    ``comoment / count`` is the (ddof=0) covariance matrix.  ``merge`` is the
    pairwise combination rule, so partial accumulators computed on disjoint
    blocks can be combined; the result depends only on the merge order.
    """

    def __init__(self, k):
        self.k = int(k)
        self.count = 0
        self.mean = np.zeros(self.k)
        self.comoment = np.zeros((self.k, self.k))

    def update(self, x):
        x = np.asarray(x, dtype=float).reshape(self.k)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.comoment = self.comoment + np.outer(delta, x - self.mean)
        return self

    def merge(self, other):
        if other.k != self.k:
            raise ValueError("cannot merge accumulators of different width")
        out = MomentAccumulator(self.k)
        n = self.count + other.count
        if n == 0:
            return out
        delta = other.mean - self.mean
        out.count = n
        out.mean = self.mean + delta * (other.count / n)
        out.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.count * other.count / n)
        return out

    @property
    def covariance(self):
        if self.count == 0:
            return np.full((self.k, self.k), np.nan)
        return 0.5 * (self.comoment + self.comoment.T) / self.count

    @property
    def variance(self):
        return np.diag(self.covariance).copy()

    def correlation(self):
        cov = self.covariance
        sd = np.sqrt(np.diag(cov))
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = cov / np.outer(sd, sd)
        np.fill_diagonal(corr, 1.0)
        return corr


def _converged(fit):
    if not fit.converged:
        raise EstimatorFailure(fit.message or "fit did not converge")
    return float(fit.estimate[0])


def _mle(family, data):
    return _converged(estimation.mle_fit(family, data))


def _min_chisquare(family, data):
    return _converged(estimation.min_chisquare_fit(family, data))


ESTIMATORS: dict[str, Callable] = {
    "mean": lambda family, data: float(np.mean(data)),
    "median": lambda family, data: float(np.median(data)),
    "mle": _mle,
    "min-chisquare": _min_chisquare,
    "moments": lambda family, data: float(estimation.method_of_moments(family, data)[0]),
}


def _resolve(estimators):
    out = []
    for item in estimators:
        if isinstance(item, str):
            if item not in ESTIMATORS:
                raise ValueError(f"unknown estimator {item!r}; known: {sorted(ESTIMATORS)}")
            out.append((item, ESTIMATORS[item]))
        else:
            name, func = item
            if not callable(func):
                raise TypeError(f"estimator {name!r} is not callable")
            out.append((str(name), func))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate estimator names in {names}")
    return out


@dataclass(frozen=True)
class ExperimentSpec:
    """What to simulate.

    ``estimators`` holds registry names (see ``ESTIMATORS``) or
    ``(name, func)`` pairs with ``func(family, data) -> float``.  The estimand
    is ``theta[target_index]``.
    """

    family: str
    theta: tuple
    sample_sizes: tuple
    replications: int
    estimators: tuple
    seed: int
    family_kwargs: dict = field(default_factory=dict)
    target_index: int = 0
    stream: int = 0
    keep_values: bool = False

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in np.atleast_1d(self.theta)))
        sizes = tuple(check_count(n, "sample size") for n in self.sample_sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"sample_sizes must be non-empty and strictly increasing, got {sizes}")
        object.__setattr__(self, "sample_sizes", sizes)
        check_count(self.replications, "replications", minimum=2)
        if not self.estimators:
            raise ValueError("at least one estimator is required")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class CellSummary:
    estimator: str
    n: int
    target: float
    replications: int
    count: int
    failures: int
    mean: float
    bias: float
    variance: float
    mse: float
    n_variance: float
    n_mse: float
    se_n_variance: float
    valid: bool

    def as_row(self):
        return dict(self.__dict__)


@dataclass
class ReplicationSummary:
    cells: list
    correlations: dict
    seed: int
    values: dict = field(default_factory=dict)

    def cell(self, estimator, n):
        for c in self.cells:
            if c.estimator == estimator and c.n == n:
                return c
        raise KeyError((estimator, n))

    def correlation(self, a, b, n):
        return self.correlations[(n, a, b)]

    @property
    def valid(self):
        return all(c.valid for c in self.cells)

    def rows(self):
        return [c.as_row() for c in self.cells]


def _run_cell(draw, estimators, n, target, replications, seed, stream, cell, keep_values):
    """Run one (n, draw) cell: returns summaries, correlation matrix and raw values."""
    names = [name for name, _ in estimators]
    k = len(names)
    single = [MomentAccumulator(1) for _ in range(k)]
    joint = MomentAccumulator(k)
    failures = np.zeros(k, dtype=int)
    kept = np.full((replications, k), np.nan) if keep_values else None
    for r in range(replications):
        rng = np.random.default_rng([seed, stream, cell, r])
        data = draw(rng)
        row = np.full(k, np.nan)
        for j, (_, func) in enumerate(estimators):
            try:
                value = float(func(data))
            except (EstimatorFailure, ArithmeticError, ValueError, np.linalg.LinAlgError):
                value = np.nan
            if np.isfinite(value):
                row[j] = value
                single[j].update([value])
            else:
                failures[j] += 1
        if np.all(np.isfinite(row)):
            joint.update(row)
        if kept is not None:
            kept[r] = row
    summaries = []
    for j, name in enumerate(names):
        acc = single[j]
        mean = float(acc.mean[0]) if acc.count else np.nan
        var = float(acc.variance[0]) if acc.count else np.nan
        bias = mean - target
        mse = var + bias * bias
        summaries.append(CellSummary(
            estimator=name, n=int(n), target=float(target), replications=replications,
            count=acc.count, failures=int(failures[j]), mean=mean, bias=bias, variance=var, mse=mse,
            n_variance=n * var, n_mse=n * mse,
            se_n_variance=n * var * np.sqrt(2.0 / max(acc.count - 1, 1)),
            valid=bool(failures[j] <= FAILURE_THRESHOLD * replications and acc.count >= 2),
        ))
    corr = joint.correlation() if joint.count >= 2 else np.full((k, k), np.nan)
    return summaries, corr, kept


def _collect(cells_out, names, seed, keep_values):
    cells, correlations, values = [], {}, {}
    for n, (summaries, corr, kept) in cells_out:
        cells.extend(summaries)
        for a in range(len(names)):
            for b in range(len(names)):
                correlations[(n, names[a], names[b])] = float(corr[a, b])
        if keep_values:
            for j, name in enumerate(names):
                values[(name, n)] = kept[:, j]
    return ReplicationSummary(cells=cells, correlations=correlations, seed=seed, values=values)


def replicate(spec):
    """Simulate ``spec`` and summarise every (estimator, n) cell.

    A replicate on which an estimator raises, returns a non-finite value or
    reports non-convergence counts as a failure for that estimator and is
    excluded from its moments (and from the correlations).  Cells with more
    than ``FAILURE_THRESHOLD`` failures are marked ``valid=False``.
    """
    family = get_family(spec.family, **spec.family_kwargs)
    theta = np.asarray(spec.theta, dtype=float)
    if not family.in_domain(theta):
        raise ValueError(f"theta={spec.theta} is outside the domain of {family.name}")
    resolved = _resolve(spec.estimators)
    bound = [(name, (lambda f: (lambda data: f(family, data)))(func)) for name, func in resolved]
    target = float(theta[spec.target_index])
    out = []
    for c, n in enumerate(spec.sample_sizes):
        draw = (lambda n_: (lambda rng: family.sampler(theta, n_, rng)))(n)
        out.append((n, _run_cell(draw, bound, n, target, spec.replications, spec.seed, spec.stream, c,
                                 spec.keep_values)))
    return _collect(out, [name for name, _ in bound], spec.seed, spec.keep_values)


def superefficiency_scan(theta_grid, n_grid, alpha=0.5, replications=1000, seed=0, threshold=False):
    """n*Var and n*MSE of the Hodges estimator and the mean for ``N(theta, 1)``.

    With ``threshold=True`` the grid is ignored and ``theta = n**(-1/4)`` is
    used at each ``n`` (the point where the shrinkage switch sits on the
    truth).
    """
    alpha = check_positive(alpha, "alpha")
    family = get_family("normal-loc")
    n_grid = [check_count(n, "n") for n in n_grid]
    points = [(n ** -0.25, n) for n in n_grid] if threshold else [(float(t), n) for t in theta_grid for n in n_grid]
    est = [("hodges", lambda x: estimation.hodges_estimate(x, alpha)), ("mean", lambda x: float(np.mean(x)))]
    rows = []
    for c, (theta, n) in enumerate(points):
        th = np.array([theta])
        summaries, _, _ = _run_cell(lambda rng: family.sampler(th, n, rng), est, n, theta, replications,
                                    seed, 1, c, False)
        for s in summaries:
            rows.append({"theta": theta, "n": n, "estimator": s.estimator, "alpha": alpha,
                         "n_variance": s.n_variance, "n_mse": s.n_mse, "se_n_variance": s.se_n_variance,
                         "bias": s.bias, "valid": s.valid})
    return rows


def efficient_correlation(fam, theta, n_grid, replications=1000, seed=0):
    """Correlation of the MLE and the minimum chi-square estimate per ``n``.

    Standard errors use the normal-theory approximation ``(1 - rho**2) / sqrt(R)``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    est = [("mle", lambda c: _mle(fam, c)), ("min-chisquare", lambda c: _min_chisquare(fam, c))]
    rows = []
    for c, n in enumerate(check_count(n, "n") for n in n_grid):
        summaries, corr, _ = _run_cell(lambda rng: fam.sampler(theta, n, rng), est, n, float(theta[0]),
                                       replications, seed, 2, c, False)
        rho = float(corr[0, 1])
        rows.append({"n": n, "correlation": rho, "se": (1 - rho**2) / np.sqrt(replications),
                     "failures_mle": summaries[0].failures, "failures_min_chisquare": summaries[1].failures,
                     "valid": summaries[0].valid and summaries[1].valid})
    return rows


def sufficiency_correlation_demo(n, replications, seed=0, pair=("mean", "median")):
    """Joint spread of a sufficient statistic ``T`` and another estimate ``S``.

    Normal location family at ``theta = 0``; returns the empirical standard
    deviations, their correlation ``rho`` and ``|sigma_T - rho sigma_S|``.
    The asymptotic mean/median targets are ``rho = sigma_T/sigma_S = sqrt(2/pi)``.
    """
    family = get_family("normal-loc")
    n = check_count(n, "n")
    est = [(f"T:{pair[0]}", lambda x: ESTIMATORS[pair[0]](family, x)),
           (f"S:{pair[1]}", lambda x: ESTIMATORS[pair[1]](family, x))]
    summaries, corr, _ = _run_cell(lambda rng: family.sampler(np.zeros(1), n, rng), est, n, 0.0,
                                   replications, seed, 3, 0, False)
    sigma_t, sigma_s = np.sqrt(summaries[0].variance), np.sqrt(summaries[1].variance)
    rho = float(corr[0, 1])
    residual = abs(sigma_t - rho * sigma_s)
    return {"n": n, "replications": replications, "sigma_T": float(sigma_t), "sigma_S": float(sigma_s),
            "rho": rho, "residual": float(residual), "relative_residual": float(residual / sigma_s),
            "rho_target": float(np.sqrt(2 / np.pi)), "se_rho": (1 - rho**2) / np.sqrt(replications)}


def consistency_scan(n_grid, replications, seed=0, multistart_grid=None):
    """Cauchy location: spread of the sample mean against the MLE and the median.

    ``multistart_grid`` overrides the solver's number of equispaced starts.
    """
    family = get_family("cauchy")
    config = estimation.SolverConfig() if multistart_grid is None else estimation.SolverConfig(
        multistart_grid=multistart_grid)
    est = [("mean", lambda x: float(np.mean(x))), ("median", lambda x: float(np.median(x))),
           ("mle", lambda x: _converged(estimation.mle_fit(family, x, config)))]
    rows = []
    for c, n in enumerate(check_count(n, "n") for n in n_grid):
        summaries, _, kept = _run_cell(lambda rng: family.sampler(np.zeros(1), n, rng), est, n, 0.0,
                                       replications, seed, 4, c, True)
        means = kept[:, 0]
        q75, q25 = np.percentile(means[np.isfinite(means)], [75, 25])
        by = {s.estimator: s for s in summaries}
        rows.append({"n": n, "iqr_mean": float(q75 - q25), "var_mean": by["mean"].variance,
                     "n_var_mle": by["mle"].n_variance, "se_n_var_mle": by["mle"].se_n_variance,
                     "n_var_median": by["median"].n_variance, "se_n_var_median": by["median"].se_n_variance,
                     "failures_mle": by["mle"].failures, "valid": all(s.valid for s in summaries)})
    return rows


def _neyman_scott_means(J):
    return np.linspace(-5.0, 5.0, J) if J > 1 else np.zeros(1)


def neyman_scott_scan(sigma2, J_grid, replications, seed=0):
    """Sampling summary of the pooled-pairs MLE of ``sigma2`` per number of pairs ``J``.

    True pair means are ``linspace(-5, 5, J)``; the estimate does not depend
    on them.
    """
    sigma2 = check_positive(sigma2, "sigma2")
    sd = np.sqrt(sigma2)
    est = [("sigma2_mle", lambda pairs: estimation.neyman_scott_mle(pairs).sigma2)]
    rows = []
    for c, J in enumerate(check_count(j, "J") for j in J_grid):
        mu = _neyman_scott_means(J)[:, None]
        summaries, _, _ = _run_cell(lambda rng: mu + sd * rng.standard_normal((J, 2)), est, J, sigma2,
                                    replications, seed, 5, c, False)
        s = summaries[0]
        rows.append({"J": J, "sigma2": sigma2, "mean_sigma2_hat": s.mean, "target": sigma2 / 2,
                     "variance": s.variance, "se_mean": float(np.sqrt(s.variance / s.count)), "valid": s.valid})
    return rows


def neyman_scott_ks(sigma2, replications, seed=0, level=0.01):
    """KS test of the ``J = 1`` estimate against ``(sigma2 / 2) * chi2(1)``."""
    sigma2 = check_positive(sigma2, "sigma2")
    replications = check_count(replications, "replications", minimum=2)
    sd = np.sqrt(sigma2)
    values = np.empty(replications)
    for r in range(replications):
        rng = np.random.default_rng([seed, 6, 0, r])
        values[r] = estimation.neyman_scott_mle(sd * rng.standard_normal((1, 2))).sigma2
    res = stats.kstest(values, stats.chi2(df=1, scale=sigma2 / 2).cdf)
    return {"sigma2": sigma2, "replications": replications, "statistic": float(res.statistic),
            "pvalue": float(res.pvalue), "level": level, "passes": bool(res.pvalue > level),
            "mean": float(np.mean(values))}

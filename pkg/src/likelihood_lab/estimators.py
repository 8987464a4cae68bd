"""scikit-learn style wrappers around the functional estimation API.

Each estimator takes a one-dimensional sample (or an ``(n_samples, 1)``
column, or a vector of cell counts for multinomial families) in ``fit`` and
exposes the fitted parameter vector as ``estimate_``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import estimation
from ._validation import check_pairs, check_sample_1d
from .families import get_family

__all__ = [
    "MaximumLikelihoodEstimator",
    "MinimumChiSquareEstimator",
    "MomentEstimator",
    "HodgesEstimator",
    "NeymanScottEstimator",
    "ConstrainedNormalMixture",
]


def _store_fit(est, res):
    est.fit_result_ = res
    est.estimate_ = np.asarray(res.estimate, dtype=float)
    est.converged_ = bool(res.converged)
    est.n_iter_ = int(res.iterations)
    est.std_error_ = np.asarray(res.std_error, dtype=float)
    est.log_likelihood_ = float(res.log_likelihood)
    return est


class _FamilyEstimator(BaseEstimator):
    def _family(self):
        return get_family(self.family, **(self.family_kwargs or {}))

    def _config(self):
        return estimation.SolverConfig(tolerance=self.tol, max_iterations=self.max_iter,
                                       multistart_grid=self.multistart_grid)

    def _data(self, X, family):
        if family.discrete:
            return np.asarray(getattr(X, "values", X), dtype=float).ravel()
        if family.name == "neyman-scott":
            return check_pairs(X)
        return check_sample_1d(X, positive=family.name == "gamma-shape")

    def score(self, X, y=None):
        """Average log-likelihood per observation at the fitted parameter."""
        check_is_fitted(self, "estimate_")
        from .families import log_likelihood

        family = self._family()
        x = self._data(X, family)
        n = float(np.sum(x)) if family.discrete else float(x.shape[0])
        return float(log_likelihood(family, x, self.estimate_)) / n


class MaximumLikelihoodEstimator(_FamilyEstimator):
    """Maximum likelihood fit of a named family.

    Parameters
    ----------
    family : str
        Registry name, e.g. ``"normal"``, ``"cauchy"``, ``"hardy-weinberg"``.
    family_kwargs : dict, optional
        Extra arguments for the family factory.
    tol : float
        Convergence bound on ``|score| / n``.
    max_iter : int
    multistart_grid : int
        Number of equispaced starts for multimodal families.

    Attributes
    ----------
    estimate_ : ndarray
    converged_ : bool
    std_error_ : ndarray
        From the observed information.
    fit_result_ : FitResult
    """

    def __init__(self, family="normal", family_kwargs=None, tol=1e-10, max_iter=200, multistart_grid=25):
        self.family = family
        self.family_kwargs = family_kwargs
        self.tol = tol
        self.max_iter = max_iter
        self.multistart_grid = multistart_grid

    def fit(self, X, y=None):
        family = self._family()
        res = estimation.mle_fit(family, self._data(X, family), self._config())
        return _store_fit(self, res)


class MinimumChiSquareEstimator(_FamilyEstimator):
    """Minimum Pearson chi-square fit of a multinomial family.

    ``fit`` takes a vector of cell counts.  ``chi_square_`` holds the
    minimised statistic.
    """

    def __init__(self, family="hardy-weinberg", family_kwargs=None, tol=1e-10, max_iter=200, multistart_grid=25):
        self.family = family
        self.family_kwargs = family_kwargs
        self.tol = tol
        self.max_iter = max_iter
        self.multistart_grid = multistart_grid

    def fit(self, X, y=None):
        family = self._family()
        if not family.discrete:
            raise ValueError(f"minimum chi-square needs a multinomial family, got {self.family!r}")
        res = estimation.min_chisquare_fit(family, self._data(X, family), self._config())
        _store_fit(self, res)
        self.chi_square_ = float(res.extra["chi_square"])
        return self


class MomentEstimator(BaseEstimator):
    """Method-of-moments shape estimate for the unit-scale gamma family."""

    def __init__(self, family="gamma-shape"):
        self.family = family

    def fit(self, X, y=None):
        family = get_family(self.family)
        self.estimate_ = estimation.method_of_moments(family, X)
        return self


class HodgesEstimator(BaseEstimator):
    """Hodges' estimator of a normal mean: shrinks ``mean`` by ``alpha`` when ``|mean| < n**(-1/4)``."""

    def __init__(self, alpha=0.5):
        self.alpha = alpha

    def fit(self, X, y=None):
        x = check_sample_1d(X)
        self.estimate_ = np.array([estimation.hodges_estimate(x, self.alpha)])
        self.shrunk_ = bool(abs(np.mean(x)) < x.size ** -0.25)
        self.n_samples_ = int(x.size)
        return self


class NeymanScottEstimator(BaseEstimator):
    """Joint MLE for pairs ``(x_1j, x_2j) ~ N(mu_j, sigma2)``.

    ``fit`` takes an array of shape ``(J, 2)``; ``transform`` returns the
    within-pair deviations from the fitted pair means.
    """

    def fit(self, X, y=None):
        res = estimation.neyman_scott_mle(X)
        self.means_ = res.means
        self.sigma2_ = res.sigma2
        self.degenerate_ = res.degenerate
        self.estimate_ = np.append(res.means, res.sigma2)
        return self

    def transform(self, X):
        check_is_fitted(self, "means_")
        X = check_pairs(X)
        if X.shape[0] != self.means_.shape[0]:
            raise ValueError(f"expected {self.means_.shape[0]} pairs, got {X.shape[0]}")
        return X - self.means_[:, None]


class ConstrainedNormalMixture(BaseEstimator):
    """Two-component normal mixture with a lower bound on both standard deviations.

    Parameters
    ----------
    sigma_min : float, optional
        Lower bound on ``sigma1`` and ``sigma2``.  Defaults to ``0.01 * std(X)``
        at fit time.
    tol, max_iter : solver settings.

    Attributes
    ----------
    weights_ : ndarray of shape (2,)
    means_ : ndarray of shape (2,), ascending
    sigmas_ : ndarray of shape (2,)
    converged_ : bool
        False when the best local maximum sits on the ``sigma_min`` bound.
    """

    def __init__(self, sigma_min=None, tol=1e-10, max_iter=200):
        self.sigma_min = sigma_min
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        x = check_sample_1d(X, min_samples=2)
        sigma_min = self.sigma_min if self.sigma_min is not None else 0.01 * float(np.std(x))
        config = estimation.SolverConfig(tolerance=self.tol, max_iterations=self.max_iter)
        res = estimation.constrained_mixture_mle(x, sigma_min, config)
        _store_fit(self, res)
        w, m1, s1, m2, s2 = self.estimate_
        self.weights_ = np.array([w, 1 - w])
        self.means_ = np.array([m1, m2])
        self.sigmas_ = np.array([s1, s2])
        self.sigma_min_ = float(sigma_min)
        return self

    def _log_joint(self, X):
        check_is_fitted(self, "estimate_")
        x = check_sample_1d(X)
        z = (x[:, None] - self.means_) / self.sigmas_
        return np.log(self.weights_) - 0.5 * z * z - np.log(self.sigmas_) - 0.5 * np.log(2 * np.pi)

    def score_samples(self, X):
        return logsumexp(self._log_joint(X), axis=1)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def predict_proba(self, X):
        lj = self._log_joint(X)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

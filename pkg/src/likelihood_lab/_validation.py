"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import DomainError


def check_sample_1d(X, name="X", positive=False, min_samples=1):
    """Return ``X`` as a finite 1-D float array.

    Accepts a :class:`~likelihood_lab.families.Sample`, a 1-D array or a
    single-column 2-D array (the scikit-learn ``(n_samples, 1)`` convention).
    """
    X = getattr(X, "values", X)
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    X = check_array(X, ensure_2d=False, dtype=float, input_name=name,
                    ensure_min_samples=min_samples)
    if X.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {X.shape}.")
    if positive and np.any(X <= 0):
        raise DomainError(f"{name} must contain strictly positive observations.")
    return X


def check_counts(counts, n_cells=None, name="counts"):
    """Return multinomial cell counts as a 1-D float array of nonnegative integers."""
    counts = getattr(counts, "values", counts)
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector of cell counts.")
    if not np.all(np.isfinite(counts)) or np.any(counts < 0):
        raise ValueError(f"{name} must be finite and nonnegative.")
    if np.any(counts != np.round(counts)):
        raise ValueError(f"{name} must be integer valued.")
    if n_cells is not None and counts.shape[0] != n_cells:
        raise ValueError(f"{name} has {counts.shape[0]} cells, expected {n_cells}.")
    if counts.sum() <= 0:
        raise ValueError(f"{name} must contain at least one observation.")
    return counts


def check_pairs(pairs, name="pairs"):
    """Return a ``(J, 2)`` float array of paired observations."""
    pairs = getattr(pairs, "values", pairs)
    pairs = check_array(np.asarray(pairs, dtype=float), input_name=name)
    if pairs.shape[1] != 2:
        raise ValueError(f"{name} must have exactly two columns, got {pairs.shape[1]}.")
    return pairs


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}.")
    if value < 0 or (strict and value == 0):
        raise ValueError(f"{name} must be {'>' if strict else '>='} 0, got {value!r}.")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}.")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}.")
    return int(value)


def as_theta(theta, dim):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (dim,):
        raise ValueError(f"parameter vector must have shape ({dim},), got {theta.shape}.")
    return theta

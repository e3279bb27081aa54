"""Shared numeric types, standardization, sample covariance and soft-thresholding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateColumn, NonPositiveDiagonal

SCALE_MODES = ("std_dev", "mad", "none")


@dataclass(frozen=True)
class Dataset:
    """An n x p observation matrix plus the column transform that produced it.

    Rows are observations, columns are variables.  ``column_means`` and
    ``column_scales`` record the affine map applied to the raw data so that
    ``raw = values * column_scales + column_means``.
    """

    values: np.ndarray
    scale_mode: str = "none"
    column_means: np.ndarray = field(default=None)
    column_scales: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("Dataset values must be a 2-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("Dataset values must be finite")
        if self.scale_mode not in SCALE_MODES:
            raise ValueError(f"unknown scale_mode {self.scale_mode!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        p = values.shape[1]
        means = np.zeros(p) if self.column_means is None else np.asarray(self.column_means, float)
        scales = np.ones(p) if self.column_scales is None else np.asarray(self.column_scales, float)
        object.__setattr__(self, "column_means", means)
        object.__setattr__(self, "column_scales", scales)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def inverse(self) -> np.ndarray:
        """Undo the recorded transform and return the raw matrix."""
        return self.values * self.column_scales + self.column_means


@dataclass(frozen=True)
class CovMatrix:
    """Sample covariance ``S = Y'Y / n`` together with the sample size."""

    s: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.s.shape[0]


def as_values(data) -> np.ndarray:
    """Return the observation matrix of a Dataset or array-like as floats."""
    if isinstance(data, Dataset):
        return data.values
    return check_array(data, dtype=np.float64, ensure_min_samples=1)


def as_cov(s, n=None):
    """Return ``(S, n)`` from a CovMatrix or a square array with explicit n."""
    if isinstance(s, CovMatrix):
        return s.s, s.n
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("covariance must be a square matrix")
    return s, n


def check_precision(omega) -> np.ndarray:
    """Validate a precision estimate: square, symmetric, positive diagonal."""
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise ValueError("precision estimate must be a square matrix")
    if not np.array_equal(omega, omega.T):
        raise ValueError("precision estimate must be exactly symmetric")
    if np.any(np.diag(omega) <= 0):
        raise NonPositiveDiagonal("precision estimate has a non-positive diagonal entry")
    return omega


def _mad(x, axis=0):
    med = np.median(x, axis=axis)
    return np.median(np.abs(x - med), axis=axis)


def standardize(raw, scale_mode="std_dev") -> Dataset:
    """Center columns and rescale them to unit dispersion.

    ``std_dev`` divides by the population (1/n) standard deviation, so the
    resulting sample covariance has a unit diagonal.  ``mad`` divides the
    mean-centred columns by their median absolute deviation (no consistency
    constant).  ``none`` leaves the data untouched.
    """
    if scale_mode not in SCALE_MODES:
        raise ValueError(f"unknown scale_mode {scale_mode!r}")
    x = check_array(raw, dtype=np.float64, ensure_min_samples=2)
    if scale_mode == "none":
        return Dataset(x.copy(), "none")
    means = x.mean(axis=0)
    centred = x - means
    if scale_mode == "std_dev":
        scales = np.sqrt(np.mean(centred**2, axis=0))
    else:
        scales = _mad(centred)
    bad = np.flatnonzero(~(scales > 0))
    if bad.size:
        raise DegenerateColumn(int(bad[0]), scale_mode)
    return Dataset(centred / scales, scale_mode, means, scales)


def sample_covariance(data) -> CovMatrix:
    """``S = Y'Y / n`` with bit-exact symmetry."""
    y = as_values(data)
    n = y.shape[0]
    s = y.T @ y / n
    s = 0.5 * (s + s.T)
    return CovMatrix(s, n)


@njit(cache=True, nogil=True)
def _soft(x, eta):
    a = abs(x) - eta
    if a <= 0.0:
        return 0.0
    return a if x > 0 else -a


def soft_threshold(x, eta):
    """``sign(x) * max(|x| - eta, 0)``; exact zero at the boundary."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if np.ndim(x) == 0:
        return _soft(float(x), float(eta))
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - eta, 0.0)


class Standardizer(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`standardize`.

    Parameters
    ----------
    scale_mode : {"std_dev", "mad", "none"}, default="std_dev"
        Dispersion measure each column is divided by after centring.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    scale_ : ndarray of shape (n_features,)
    n_features_in_ : int
    """

    def __init__(self, scale_mode="std_dev"):
        self.scale_mode = scale_mode

    def fit(self, X, y=None):
        ds = standardize(X, self.scale_mode)
        self.mean_ = ds.column_means
        self.scale_ = ds.column_scales
        self.n_features_in_ = ds.p
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_array(X, dtype=np.float64)
        return X * self.scale_ + self.mean_

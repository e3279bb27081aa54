"""CONCORD: coordinate-wise descent on the convex pseudo-likelihood.

The objective minimised over symmetric matrices with positive diagonal is::

    Q(omega) = -n sum_i log(omega_ii)
               + 1/2 sum_i || omega_ii Y_i + sum_{j != i} omega_ij Y_j ||^2
               + lam sum_{i<j} |omega_ij|

Each coordinate has a closed-form minimiser.  Two sweep implementations are
provided: ``naive`` works from the covariance matrix (O(p^3) per sweep) and
``residual_cached`` maintains regression residuals (O(n p^2) per sweep).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from .exceptions import NonPositiveDiagonal, ZeroDiagonalCovariance
from .linalg import Dataset, as_cov, as_values, sample_covariance, soft_threshold, standardize

VARIANTS = {"corrected": 1.0, "uncorrected": 0.5}
PATHS = ("naive", "residual_cached", "auto")
INITS = ("diagonal_inverse_s", "identity")


@dataclass(frozen=True)
class ConcordConfig:
    """Solver settings.

    ``lam`` is the absolute penalty; ``lam_star * n`` gives the same thing.
    ``init`` is ``"diagonal_inverse_s"``, ``"identity"`` or a p x p array used
    as a warm start.
    """

    lam: float = 0.0
    max_sweeps: int = 500
    tol: float = 1e-8
    variant: str = "corrected"
    path: str = "auto"
    init: object = "diagonal_inverse_s"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lam must be non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be a positive integer")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.path not in PATHS:
            raise ValueError(f"unknown path {self.path!r}")
        if isinstance(self.init, str) and self.init not in INITS:
            raise ValueError(f"unknown init {self.init!r}")

    def replace(self, **changes) -> "ConcordConfig":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return ConcordConfig(**values)


@dataclass
class FitResult:
    omega: np.ndarray
    sweeps_used: int
    converged: bool
    objective_trace: np.ndarray
    max_change_trace: np.ndarray
    # largest objective change caused by a single coordinate update, per sweep
    max_update_increase: np.ndarray = field(default_factory=lambda: np.empty(0))
    initial_objective: float = float("nan")
    lam: float = 0.0
    path: str = "naive"


@dataclass
class ResidualCache:
    """Row ``r[m]`` is ``Y_m + sum_{k != m} (omega_mk / omega_mm) Y_k``."""

    r: np.ndarray


def _check_diag(omega):
    if np.any(np.diag(omega) <= 0):
        raise NonPositiveDiagonal("omega has a non-positive diagonal entry")


def _penalty(omega, lam):
    return lam * np.abs(np.triu(omega, 1)).sum()


def concord_objective(omega, data, lam, variant="corrected") -> float:
    """Evaluate the penalised pseudo-likelihood at ``omega``."""
    omega = np.asarray(omega, dtype=float)
    _check_diag(omega)
    y = as_values(data)
    n = y.shape[0]
    logw = VARIANTS[variant]
    fitted = y @ omega
    return float(
        -logw * n * np.log(np.diag(omega)).sum() + 0.5 * np.sum(fitted * fitted) + _penalty(omega, lam)
    )


def concord_diag_update(omega, s, i, variant="corrected") -> float:
    """Closed-form minimiser of the objective in ``omega_ii``."""
    s, _ = as_cov(s)
    omega = np.asarray(omega, dtype=float)
    sii = s[i, i]
    if not sii > 0:
        raise ZeroDiagonalCovariance(i)
    t = float(omega[i] @ s[i] - omega[i, i] * sii)
    c = 4.0 * VARIANTS[variant]
    return (-t + math.sqrt(t * t + c * sii)) / (2.0 * sii)


def concord_diag_update_uncorrected(omega, s, i) -> float:
    """Diagonal update for the objective with ``n/2`` weight on the log term."""
    return concord_diag_update(omega, s, i, variant="uncorrected")


def _offdiag_numerator(omega, s, i, j):
    # sum_{j' != j} w_ij' s_jj' + sum_{i' != i} w_i'j s_ii'
    return float(omega[i] @ s[j] - omega[i, j] * s[j, j] + omega[j] @ s[i] - omega[i, j] * s[i, i])


def concord_offdiag_update(omega, s, i, j, lam, n=None) -> float:
    """Closed-form minimiser of the objective in ``omega_ij`` (i != j)."""
    s, n_cov = as_cov(s)
    n = n_cov if n is None else n
    if n is None:
        raise ValueError("sample size n is required with a bare covariance array")
    if i == j:
        raise ValueError("off-diagonal update needs i != j")
    i, j = min(i, j), max(i, j)
    omega = np.asarray(omega, dtype=float)
    denom = s[i, i] + s[j, j]
    if not denom > 0:
        raise ZeroDiagonalCovariance(i if s[i, i] <= 0 else j)
    return soft_threshold(-_offdiag_numerator(omega, s, i, j), lam / n) / denom


def residual_init(data, omega) -> ResidualCache:
    y = as_values(data)
    omega = np.asarray(omega, dtype=float)
    _check_diag(omega)
    r = (y @ omega) / np.diag(omega)
    return ResidualCache(np.ascontiguousarray(r.T))


def residual_apply_offdiag(cache, data, omega, k, l, new_value) -> ResidualCache:
    """Account for ``omega_kl -> new_value`` in place; only rows k and l move.

    ``omega`` must still hold the old value of ``omega_kl``.
    """
    if k == l:
        raise ValueError("off-diagonal residual update needs k != l")
    y = as_values(data)
    delta = new_value - omega[k, l]
    if delta != 0.0:
        cache.r[k] += (delta / omega[k, k]) * y[:, l]
        cache.r[l] += (delta / omega[l, l]) * y[:, k]
    return cache


def residual_apply_diag(cache, data, omega, k, new_value) -> ResidualCache:
    """Account for ``omega_kk -> new_value`` in place; only row k moves."""
    if not new_value > 0:
        raise NonPositiveDiagonal("new diagonal value must be positive")
    y = as_values(data)
    old = omega[k, k]
    if new_value != old:
        cache.r[k] = (cache.r[k] - y[:, k]) * (old / new_value) + y[:, k]
    return cache


def inner_products_via_residuals(cache, data, omega, i, j) -> float:
    """``sum_{k != j} omega_ik s_jk`` computed from the residual cache in O(n).

    Both sides use ``s = Y'Y / n``, hence the division of ``Y_j' r_i`` by n.
    """
    y = as_values(data)
    n = y.shape[0]
    sjj = float(y[:, j] @ y[:, j]) / n
    return -omega[i, j] * sjj + omega[i, i] * float(y[:, j] @ cache.r[i]) / n


def _initial_omega(init, s):
    p = s.shape[0]
    if isinstance(init, str):
        if init == "identity":
            return np.eye(p)
        return np.diag(1.0 / np.diag(s))
    omega = np.array(init, dtype=float, copy=True)
    if omega.shape != (p, p):
        raise ValueError(f"initial estimate must have shape {(p, p)}")
    omega = 0.5 * (omega + omega.T)
    _check_diag(omega)
    return omega


def resolve_path(path, n, p):
    if path == "auto":
        return "residual_cached" if n < p else "naive"
    return path


def concord_fit(data, config=None, **overrides) -> FitResult:
    """Run Gauss-Seidel sweeps until ``max|omega_new - omega_old| < tol``.

    Each sweep updates every off-diagonal entry (row-major, upper triangle)
    and then every diagonal entry.  Non-convergence is reported through
    ``FitResult.converged`` rather than raised.
    """
    config = ConcordConfig() if config is None else config
    if overrides:
        config = config.replace(**overrides)
    y = np.ascontiguousarray(as_values(data), dtype=np.float64)
    n, p = y.shape
    cov = sample_covariance(y)
    s = cov.s
    sdiag = np.ascontiguousarray(np.diag(s))
    bad = np.flatnonzero(~(sdiag > 0))
    if bad.size:
        raise ZeroDiagonalCovariance(int(bad[0]))

    lam = float(config.lam)
    logw = VARIANTS[config.variant]
    path = resolve_path(config.path, n, p)
    omega = np.ascontiguousarray(_initial_omega(config.init, s))

    if path == "residual_cached":
        yt = np.ascontiguousarray(y.T)
        r = residual_init(y, omega).r

        def objective():
            d = np.diag(omega)
            quad = 0.5 * float(np.sum((d[:, None] * r) ** 2))
            return -logw * n * float(np.log(d).sum()) + quad + _penalty(omega, lam)

        def sweep():
            return _kernels.concord_sweep_cached(omega, yt, r, sdiag, float(n), lam, logw)

    else:

        def objective():
            quad = 0.5 * n * float(np.sum((omega @ s) * omega))
            return -logw * n * float(np.log(np.diag(omega)).sum()) + quad + _penalty(omega, lam)

        def sweep():
            return _kernels.concord_sweep_naive(omega, s, float(n), lam, logw)

    q0 = objective()
    objectives, changes, increases = [], [], []
    converged = False
    for _ in range(config.max_sweeps):
        old = omega.copy()
        increases.append(sweep())
        objectives.append(objective())
        change = float(np.max(np.abs(omega - old)))
        changes.append(change)
        if change < config.tol:
            converged = True
            break

    return FitResult(
        omega=omega,
        sweeps_used=len(changes),
        converged=converged,
        objective_trace=np.asarray(objectives),
        max_change_trace=np.asarray(changes),
        max_update_increase=np.asarray(increases),
        initial_objective=q0,
        lam=lam,
        path=path,
    )


def check_optimality(omega, s, lam, n=None):
    """Subgradient optimality residuals of a CONCORD estimate.

    Returns ``(zero_excess, nonzero_residual, diag_residual)``: how far
    ``|grad|`` exceeds ``lam/n`` over zero off-diagonals, the worst smooth
    stationarity residual over nonzero off-diagonals, and the worst
    diagonal stationarity residual.  All are per-sample (divided by n).
    """
    s, n_cov = as_cov(s)
    n = n_cov if n is None else n
    omega = np.asarray(omega, dtype=float)
    eta = lam / n
    grad = omega @ s + (omega @ s).T
    iu = np.triu_indices_from(omega, 1)
    g = grad[iu]
    w = omega[iu]
    zero = w == 0
    zero_excess = float(np.max(np.abs(g[zero]) - eta, initial=0.0))
    nonzero_residual = float(np.max(np.abs(g[~zero] + eta * np.sign(w[~zero])), initial=0.0))
    d = np.diag(omega)
    diag_grad = -1.0 / d + np.diag(omega @ s)
    return max(zero_excess, 0.0), nonzero_residual, float(np.max(np.abs(diag_grad)))


def nonzero_fraction(omega) -> float:
    """Fraction of off-diagonal pairs with a nonzero estimate."""
    p = omega.shape[0]
    if p < 2:
        return 0.0
    return float(np.count_nonzero(np.triu(omega, 1))) / (p * (p - 1) / 2)


def partial_correlations(omega) -> np.ndarray:
    d = np.sqrt(np.diag(omega))
    rho = -omega / np.outer(d, d)
    np.fill_diagonal(rho, 1.0)
    return rho


class Concord(BaseEstimator):
    """Sparse partial-correlation graph estimator.

    Parameters
    ----------
    lam : float, default=0.0
        Penalty on the off-diagonal entries, on the absolute scale.
    lam_star : float or None, default=None
        Per-sample penalty; when given it overrides ``lam`` with
        ``lam_star * n_samples``.
    max_sweeps : int, default=500
    tol : float, default=1e-8
        Max-norm threshold on successive iterates.
    variant : {"corrected", "uncorrected"}, default="corrected"
    path : {"auto", "naive", "residual_cached"}, default="auto"
    init : str or array-like, default="diagonal_inverse_s"
    scale_mode : {"std_dev", "mad", "none"}, default="std_dev"
        Column standardization applied before fitting.

    Attributes
    ----------
    precision_ : ndarray of shape (n_features, n_features)
        Estimate on the standardized scale.
    raw_precision_ : ndarray of shape (n_features, n_features)
        The same estimate mapped back to the scale of the input columns.
    partial_correlation_ : ndarray of shape (n_features, n_features)
    converged_ : bool
    n_iter_ : int
    result_ : FitResult
    """

    def __init__(
        self,
        lam=0.0,
        lam_star=None,
        max_sweeps=500,
        tol=1e-8,
        variant="corrected",
        path="auto",
        init="diagonal_inverse_s",
        scale_mode="std_dev",
    ):
        self.lam = lam
        self.lam_star = lam_star
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.variant = variant
        self.path = path
        self.init = init
        self.scale_mode = scale_mode

    def _config(self, n):
        lam = self.lam if self.lam_star is None else self.lam_star * n
        return ConcordConfig(
            lam=lam,
            max_sweeps=self.max_sweeps,
            tol=self.tol,
            variant=self.variant,
            path=self.path,
            init=self.init,
        )

    def fit(self, X, y=None):
        ds = X if isinstance(X, Dataset) else standardize(X, self.scale_mode)
        self.dataset_ = ds
        self.n_features_in_ = ds.p
        self.location_ = ds.column_means
        self.scale_ = ds.column_scales
        res = concord_fit(ds, self._config(ds.n))
        self.result_ = res
        self.precision_ = res.omega
        self.raw_precision_ = res.omega / np.outer(ds.column_scales, ds.column_scales)
        self.partial_correlation_ = partial_correlations(res.omega)
        self.converged_ = res.converged
        self.n_iter_ = res.sweeps_used
        self.lam_ = res.lam
        return self

    def score(self, X, y=None):
        """Negative per-sample pseudo-likelihood of X (higher is better)."""
        check_is_fitted(self, "precision_")
        z = (as_values(X) - self.location_) / self.scale_
        return -concord_objective(self.precision_, z, 0.0, self.variant) / z.shape[0]

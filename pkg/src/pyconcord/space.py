"""SPACE: alternating partial-correlation lasso and conditional-variance updates.

Included as a baseline.  The alternation is not guaranteed to converge; a
cycle detector reports period-2 to period-4 oscillation of the
reconstructed precision matrices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from . import _kernels
from .exceptions import DegenerateResidual, NonPositiveDiagonal
from .linalg import Dataset, as_values, standardize

WEIGHTS = ("uniform", "partial_variance")


@dataclass(frozen=True)
class SpaceState:
    """Partial correlations (symmetric, zero diagonal) and omega_ii."""

    rho: np.ndarray
    omega_diag: np.ndarray
    weights: str = "uniform"

    def __post_init__(self):
        if self.weights not in WEIGHTS:
            raise ValueError(f"unknown weights {self.weights!r}")
        if np.any(np.asarray(self.omega_diag) <= 0):
            raise NonPositiveDiagonal("omega_diag must be strictly positive")

    @property
    def w(self) -> np.ndarray:
        if self.weights == "uniform":
            return np.ones_like(self.omega_diag)
        return np.asarray(self.omega_diag, dtype=float)

    def coefficients(self) -> np.ndarray:
        """Regression coefficients ``beta_ij = rho_ij sqrt(omega_jj / omega_ii)``."""
        d = np.sqrt(self.omega_diag)
        return self.rho * d[None, :] / d[:, None]


@dataclass
class CycleReport:
    period: int
    matrices: list


@dataclass
class SpaceFitResult:
    state: SpaceState
    omega: np.ndarray
    converged: bool
    sweeps_used: int
    trace: list
    cycle: CycleReport | None = None
    # max |Omega^(r) - Omega^(r-1)| per outer iteration
    change_trace: np.ndarray = field(default_factory=lambda: np.empty(0))


def space_reconstruct_omega(state) -> np.ndarray:
    """``omega_ij = -rho_ij sqrt(omega_ii omega_jj)`` with ``omega_ii`` on the diagonal."""
    d = np.sqrt(state.omega_diag)
    omega = -state.rho * np.outer(d, d) + 0.0
    np.fill_diagonal(omega, state.omega_diag)
    return omega


def space_state_from_omega(omega, weights="uniform") -> SpaceState:
    omega = np.asarray(omega, dtype=float)
    diag = np.diag(omega).copy()
    if np.any(diag <= 0):
        raise NonPositiveDiagonal("omega has a non-positive diagonal entry")
    d = np.sqrt(diag)
    rho = -omega / np.outer(d, d)
    np.fill_diagonal(rho, 0.0)
    return SpaceState(rho, diag, weights)


def _residuals(y, state):
    # column i: Y_i - sum_j beta_ij Y_j
    return y - y @ state.coefficients().T


def space_objective(state, data, lam) -> float:
    """Penalised objective with partial-variance weighting (w_i = omega_ii)."""
    y = as_values(data)
    n = y.shape[0]
    om = np.asarray(state.omega_diag, dtype=float)
    if np.any(om <= 0):
        raise NonPositiveDiagonal("omega_diag must be strictly positive")
    res = _residuals(y, state)
    rss = np.sum(res * res, axis=0)
    return float(0.5 * np.sum(-n * np.log(om) + om * rss) + lam * np.abs(np.triu(state.rho, 1)).sum())


def space_rho_step(state, data, lam, tol=1e-8, max_sweeps=200) -> np.ndarray:
    """Solve the joint lasso over rho with omega_ii (and the weights) held fixed.

    Warm-started from ``state.rho``; returns the new symmetric rho matrix.
    """
    y = np.ascontiguousarray(as_values(data), dtype=np.float64)
    yt = np.ascontiguousarray(y.T)
    rho = np.ascontiguousarray(np.array(state.rho, dtype=float))
    np.fill_diagonal(rho, 0.0)
    om = np.ascontiguousarray(state.omega_diag, dtype=float)
    e = np.ascontiguousarray(_residuals(y, replace(state, rho=rho)).T)
    gdiag = np.einsum("ij,ij->j", y, y)
    _kernels.space_rho_sweeps(rho, om, np.ascontiguousarray(state.w), yt, e, gdiag, float(lam), tol, max_sweeps)
    return rho


def space_variance_step(state, data) -> np.ndarray:
    """``1 / omega_ii = ||Y_i - sum_j rho_ij sqrt(omega_jj / omega_ii) Y_j||^2 / n``.

    The right-hand side is evaluated at ``state`` as given, so callers pass
    the freshly updated rho together with the previous omega_ii.
    """
    y = as_values(data)
    n = y.shape[0]
    res = _residuals(y, state)
    rss = np.sum(res * res, axis=0)
    bad = np.flatnonzero(~(rss > 0))
    if bad.size:
        raise DegenerateResidual(int(bad[0]))
    return n / rss


def space_variance_step_exact(state, data, tol=1e-12, max_sweeps=1000) -> np.ndarray:
    """Minimise the partial-variance objective over all omega_ii with rho fixed.

    With ``z_i = sqrt(omega_ii)`` the smooth part is
    ``-n sum log z_i + z'Az / 2`` where ``A = G o (B'B)``, ``G = Y'Y`` and
    ``B = I - rho``; this is convex, and coordinate descent on z solves it.
    """
    y = as_values(data)
    n = y.shape[0]
    b = np.eye(state.rho.shape[0]) - state.rho
    a = np.ascontiguousarray((y.T @ y) * (b.T @ b))
    z = np.sqrt(np.asarray(state.omega_diag, dtype=float)).copy()
    _kernels.positive_quadratic_cd(a, z, float(n), tol, max_sweeps)
    return z * z


def _detect_cycle(history, tol, max_period):
    cur = history[-1]
    if len(history) < 2 or np.max(np.abs(cur - history[-2])) < tol:
        return None
    for period in range(2, max_period + 1):
        if len(history) <= 2 * period:
            break
        # require two consecutive full periods to repeat
        if all(
            np.max(np.abs(history[-1 - k] - history[-1 - k - period])) < tol for k in range(period)
        ):
            return period
    return None


def space_fit(
    data,
    lam,
    weights="uniform",
    max_iters=1500,
    tol=1e-6,
    init=None,
    trace_len=6,
    inner_tol=1e-8,
    inner_max_sweeps=200,
    variance="published",
    cycle_tol=1e-6,
    burn_in=10,
    max_period=4,
) -> SpaceFitResult:
    """Alternate the rho step and the variance step until the iterates settle.

    Stops early with ``converged=False`` when the reconstructed precision
    matrices repeat with period 2..``max_period`` (within ``cycle_tol``
    relative to the entry magnitude) while successive iterates still differ.
    ``variance="exact"`` swaps the variance update for the exact partial
    minimiser, which makes each iteration a descent step for
    ``weights="partial_variance"``.
    """
    y = as_values(data)
    n, p = y.shape
    if init is None:
        init = n / np.einsum("ij,ij->j", y, y)
    state = SpaceState(np.zeros((p, p)), np.asarray(init, dtype=float).copy(), weights)
    vstep = space_variance_step if variance == "published" else space_variance_step_exact

    prev = space_reconstruct_omega(state)
    history = deque([prev], maxlen=2 * max_period + 2)
    trace = deque(maxlen=trace_len)
    changes = []
    converged = False
    cycle = None
    it = 0
    for it in range(1, max_iters + 1):
        rho = space_rho_step(state, y, lam, inner_tol, inner_max_sweeps)
        omega_diag = vstep(replace(state, rho=rho), y)
        state = SpaceState(rho, omega_diag, weights)
        cur = space_reconstruct_omega(state)
        change = float(np.max(np.abs(cur - prev)))
        changes.append(change)
        trace.append(cur)
        if change < tol:
            converged = True
            break
        scale = np.maximum(1.0, np.abs(cur))
        history.append(cur)
        if it > burn_in:
            scaled = [h / scale for h in history]
            period = _detect_cycle(scaled, cycle_tol, max_period)
            if period is not None:
                cycle = CycleReport(period, [h.copy() for h in list(history)[-period:]])
                break
        prev = cur
    return SpaceFitResult(
        state=state,
        omega=space_reconstruct_omega(state),
        converged=converged,
        sweeps_used=it,
        trace=list(trace),
        cycle=cycle,
        change_trace=np.asarray(changes),
    )


class Space(BaseEstimator):
    """SPACE estimator with uniform or partial-variance weights.

    Parameters
    ----------
    lam : float, default=0.0
        Absolute penalty on the partial correlations.
    weights : {"uniform", "partial_variance"}, default="uniform"
    max_iters : int, default=1500
        Outer iterations; 3 reproduces the short-run mode of the reference
        implementation.
    tol : float, default=1e-6
    scale_mode : {"std_dev", "mad", "none"}, default="std_dev"
    """

    def __init__(self, lam=0.0, weights="uniform", max_iters=1500, tol=1e-6, scale_mode="std_dev"):
        self.lam = lam
        self.weights = weights
        self.max_iters = max_iters
        self.tol = tol
        self.scale_mode = scale_mode

    def fit(self, X, y=None):
        ds = X if isinstance(X, Dataset) else standardize(X, self.scale_mode)
        res = space_fit(ds, self.lam, self.weights, self.max_iters, self.tol)
        self.result_ = res
        self.precision_ = res.omega
        self.partial_correlation_ = res.state.rho + np.eye(ds.p)
        self.converged_ = res.converged
        self.cycle_ = res.cycle
        self.n_iter_ = res.sweeps_used
        self.n_features_in_ = ds.p
        return self

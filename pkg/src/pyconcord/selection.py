"""Penalty paths, BIC selection and cross-validated predictive risk."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .concord import ConcordConfig, FitResult, concord_fit, nonzero_fraction, partial_correlations
from .exceptions import FoldTooSmall, ZeroRSS
from .linalg import Dataset, as_values, sample_covariance, standardize


@dataclass
class PathResult:
    lambdas: np.ndarray
    fits: list
    nonzero_fraction: np.ndarray

    @property
    def omegas(self):
        return [f.omega for f in self.fits]


@dataclass
class BicEntry:
    lam: float
    rss: np.ndarray
    bic_per_node: np.ndarray
    bic_total: float
    nz_fraction: float

    def to_dict(self):
        return {
            "lambda": self.lam,
            "bic_total": self.bic_total,
            "bic_per_node": self.bic_per_node.tolist(),
            "nz_fraction": self.nz_fraction,
        }


@dataclass
class BicReport:
    entries: list
    selected_lambda: float
    selected_index: int

    def to_json(self, **kw) -> str:
        return json.dumps(
            {"selected_lambda": self.selected_lambda, "entries": [e.to_dict() for e in self.entries]}, **kw
        )


def lambda_max(data) -> float:
    """Smallest absolute penalty whose CONCORD solution is diagonal.

    At the diagonal fixed point ``omega_ii = 1/sqrt(s_ii)`` the off-diagonal
    numerator is ``s_ij (omega_ii + omega_jj)``; it must sit inside the
    soft-threshold dead zone ``lam / n``. A relative margin of 1e-12 keeps
    round-off from leaving residues of order 1e-17 at the boundary.
    """
    cov = sample_covariance(data)
    s = cov.s
    p = s.shape[0]
    if p < 2:
        return 0.0
    d = 1.0 / np.sqrt(np.diag(s))
    num = np.abs(s) * (d[:, None] + d[None, :])
    iu = np.triu_indices(p, 1)
    return float(cov.n * num[iu].max() * (1 + 1e-12))


def default_grid(data, n_lambdas=50, ratio=0.01) -> np.ndarray:
    """``n_lambdas`` log-spaced penalties from ``lambda_max`` down to ``ratio * lambda_max``."""
    top = lambda_max(data)
    if top <= 0:
        raise ValueError("data give lambda_max = 0; no off-diagonal signal to penalise")
    return np.geomspace(top, top * ratio, n_lambdas)


def _check_grid(lambdas):
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if lambdas.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(lambdas < 0):
        raise ValueError("lambda grid must be non-negative")
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda grid must be strictly decreasing")
    return lambdas


def penalty_path(data, lambdas, config=None) -> PathResult:
    """Fit along a decreasing grid, warm-starting each fit from the previous one."""
    lambdas = _check_grid(lambdas)
    config = ConcordConfig() if config is None else config
    y = as_values(data)
    fits = []
    init = config.init
    for lam in lambdas:
        res = concord_fit(y, config.replace(lam=float(lam), init=init))
        fits.append(res)
        init = res.omega
    return PathResult(lambdas, fits, np.array([nonzero_fraction(f.omega) for f in fits]))


def node_rss(omega, data) -> np.ndarray:
    """``RSS_i = ||Y_i - sum_{j != i} beta_ij Y_j||^2`` with ``beta_ij = -omega_ij / omega_ii``."""
    y = as_values(data)
    omega = np.asarray(omega, dtype=float)
    res = (y @ omega) / np.diag(omega)
    return np.sum(res * res, axis=0)


def bic_score(omega_hat, data, lam=float("nan")) -> BicEntry:
    """``BIC_i = n log RSS_i + log(n) * #{j != i : omega_ij != 0}`` and their sum."""
    omega_hat = np.asarray(omega_hat, dtype=float)
    y = as_values(data)
    n = y.shape[0]
    rss = node_rss(omega_hat, y)
    bad = np.flatnonzero(~(rss > 0))
    if bad.size:
        raise ZeroRSS(int(bad[0]))
    degree = np.count_nonzero(omega_hat - np.diag(np.diag(omega_hat)), axis=1)
    per_node = n * np.log(rss) + math.log(n) * degree
    return BicEntry(float(lam), rss, per_node, float(per_node.sum()), nonzero_fraction(omega_hat))


def _argmin_prefer_first(values):
    # grids are decreasing, so the first minimiser is the larger lambda
    best = 0
    for k in range(1, len(values)):
        if values[k] < values[best]:
            best = k
    return best


def select_lambda_bic(path, data):
    """Return ``(lambda, BicReport)`` minimising total BIC; ties go to the larger lambda."""
    if len(path.fits) == 0:
        raise ValueError("empty path")
    entries = [bic_score(f.omega, data, lam) for f, lam in zip(path.fits, path.lambdas)]
    k = _argmin_prefer_first([e.bic_total for e in entries])
    lam = float(path.lambdas[k])
    return lam, BicReport(entries, lam, k)


def make_folds(n, folds=5, mode="contiguous", seed=None):
    """Index arrays for each test fold (contiguous blocks unless ``mode="random"``)."""
    if folds < 2:
        raise FoldTooSmall("need at least two folds")
    if n < folds:
        raise FoldTooSmall(f"{n} observations cannot fill {folds} folds")
    order = np.arange(n)
    if mode == "random":
        if seed is None:
            raise ValueError("random folds need an explicit seed")
        order = np.random.default_rng(seed).permutation(n)
    elif mode != "contiguous":
        raise ValueError(f"unknown fold mode {mode!r}")
    parts = [np.sort(part) for part in np.array_split(order, folds)]
    for part in parts:
        if n - part.size < 2:
            raise FoldTooSmall("a training split has fewer than two observations")
    return parts


def fold_risk(omega, test) -> float:
    """Per-observation prediction risk of one held-out block."""
    return float(node_rss(omega, test).sum()) / test.shape[0]


def _fold_path(y, test_idx, lambdas, config):
    mask = np.ones(y.shape[0], dtype=bool)
    mask[test_idx] = False
    path = penalty_path(y[mask], lambdas, config)
    test = y[test_idx]
    return np.array([fold_risk(f.omega, test) for f in path.fits])


def cv_risk_path(data, lambdas, folds=5, config=None, fold_mode="contiguous", seed=None, jobs=1):
    """Predictive risk ``PR(lambda)`` for every grid value (one warm path per fold)."""
    lambdas = _check_grid(lambdas)
    config = ConcordConfig() if config is None else config
    y = as_values(data)
    parts = make_folds(y.shape[0], folds, fold_mode, seed)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_fold = list(pool.map(lambda idx: _fold_path(y, idx, lambdas, config), parts))
    else:
        per_fold = [_fold_path(y, idx, lambdas, config) for idx in parts]
    return np.sum(per_fold, axis=0)


def cv_predictive_risk(data, lam, folds=5, config=None, fold_mode="contiguous", seed=None) -> float:
    """Sum over folds of the held-out residual sum of squares per observation."""
    return float(cv_risk_path(data, [lam], folds, config, fold_mode, seed)[0])


def select_lambda_cv(data, lambdas, folds=5, config=None, fold_mode="contiguous", seed=None, jobs=1):
    """Return ``(lambda, PR values)``; ties go to the larger lambda."""
    lambdas = _check_grid(lambdas)
    risks = cv_risk_path(data, lambdas, folds, config, fold_mode, seed, jobs)
    return float(lambdas[_argmin_prefer_first(risks)]), risks


class _SelectedConcord(BaseEstimator):
    def _prepare(self, X):
        ds = X if isinstance(X, Dataset) else standardize(X, self.scale_mode)
        grid = default_grid(ds, self.n_lambdas) if self.lambdas is None else np.asarray(self.lambdas, float)
        config = ConcordConfig(max_sweeps=self.max_sweeps, tol=self.tol)
        return ds, grid, config

    def _finish(self, ds, grid, path, k):
        self.lambdas_ = grid
        self.path_ = path
        self.lam_ = float(grid[k])
        self.precision_ = path.fits[k].omega
        self.raw_precision_ = self.precision_ / np.outer(ds.column_scales, ds.column_scales)
        self.partial_correlation_ = partial_correlations(self.precision_)
        self.n_features_in_ = ds.p
        return self


class ConcordBIC(_SelectedConcord):
    """CONCORD with the penalty chosen by minimum total BIC along a warm path.

    Parameters
    ----------
    lambdas : array-like or None
        Strictly decreasing absolute penalties; defaults to a log grid below
        ``lambda_max``.
    n_lambdas : int, default=50
    max_sweeps, tol : see :class:`~pyconcord.concord.Concord`.
    scale_mode : {"std_dev", "mad", "none"}, default="std_dev"
    """

    def __init__(self, lambdas=None, n_lambdas=50, max_sweeps=500, tol=1e-8, scale_mode="std_dev"):
        self.lambdas = lambdas
        self.n_lambdas = n_lambdas
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.scale_mode = scale_mode

    def fit(self, X, y=None):
        ds, grid, config = self._prepare(X)
        path = penalty_path(ds, grid, config)
        _, report = select_lambda_bic(path, ds)
        self.bic_report_ = report
        return self._finish(ds, grid, path, report.selected_index)


class ConcordCV(_SelectedConcord):
    """CONCORD with the penalty chosen by K-fold predictive risk.

    Parameters
    ----------
    lambdas : array-like or None
    n_lambdas : int, default=50
    folds : int, default=5
    fold_mode : {"contiguous", "random"}, default="contiguous"
    random_state : int or None
        Seed for ``fold_mode="random"``.
    """

    def __init__(
        self,
        lambdas=None,
        n_lambdas=50,
        folds=5,
        fold_mode="contiguous",
        random_state=None,
        max_sweeps=500,
        tol=1e-8,
        scale_mode="std_dev",
    ):
        self.lambdas = lambdas
        self.n_lambdas = n_lambdas
        self.folds = folds
        self.fold_mode = fold_mode
        self.random_state = random_state
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.scale_mode = scale_mode

    def fit(self, X, y=None):
        ds, grid, config = self._prepare(X)
        risks = cv_risk_path(ds, grid, self.folds, config, self.fold_mode, self.random_state)
        self.cv_risk_ = risks
        k = _argmin_prefer_first(risks)
        path = penalty_path(ds, grid[: k + 1], config)
        self._finish(ds, grid[: k + 1], path, k)
        self.lambdas_ = grid
        return self

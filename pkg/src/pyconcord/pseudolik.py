"""Regression-form and matrix-form pseudo-likelihoods of five graphical model methods.

Every method's negative pseudo-likelihood can be written as
``n/2 * (-log det G(omega) + tr(S H(omega)))`` where:

=========  ==============  =========================
method     G(omega)        H(omega)
=========  ==============  =========================
concord    D^2             omega^2
space1     D               omega D^-2 omega
space2     D               omega D^-1 omega
symlasso   D               omega D^-1 omega
splice     D               omega D^-1 omega
=========  ==============  =========================

with ``D = diag(omega)``.  The regression forms below are written in each
method's own parameterisation and mapped from omega.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NonPositiveDiagonal, NotPositiveDefinite
from .linalg import as_cov, as_values

METHODS = ("concord", "space1", "space2", "symlasso", "splice")


def _diag(omega):
    d = np.diag(omega).copy()
    if np.any(d <= 0):
        raise NonPositiveDiagonal("omega has a non-positive diagonal entry")
    return d


@dataclass(frozen=True)
class MethodForm:
    """Declared G and H maps of one pseudo-likelihood."""

    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def log_det_g(self, omega) -> float:
        # G is diagonal, so log det is a sum of logs
        logd = np.log(_diag(omega)).sum()
        return 2.0 * logd if self.method == "concord" else logd

    def g(self, omega) -> np.ndarray:
        d = _diag(omega)
        return np.diag(d * d if self.method == "concord" else d)

    def h(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        d = _diag(omega)
        if self.method == "concord":
            return omega @ omega
        if self.method == "space1":
            return omega @ (omega / (d * d)[:, None])
        return omega @ (omega / d[:, None])


def _form(method):
    return method if isinstance(method, MethodForm) else MethodForm(method)


def unified_loglik(omega, s, method, n=None) -> float:
    """``n/2 * (-log det G + tr(S H))`` with H formed explicitly."""
    s, n_cov = as_cov(s)
    n = n_cov if n is None else n
    form = _form(method)
    return 0.5 * n * (-form.log_det_g(omega) + float(np.sum(s * form.h(omega))))


def regression_loglik(omega, data, method) -> float:
    """Sum of node-wise regression terms for ``method``, parameterised by omega."""
    form = _form(method)
    omega = np.asarray(omega, dtype=float)
    y = as_values(data)
    n = y.shape[0]
    d = _diag(omega)
    off = omega - np.diag(d)
    m = form.method
    if m == "concord":
        fitted = y * d + y @ off  # column i: omega_ii Y_i + sum_j omega_ij Y_j
        return 0.5 * float(np.sum(-n * np.log(d * d)) + np.sum(fitted * fitted))
    if m in ("space1", "space2"):
        sq = np.sqrt(d)
        rho = -off / np.outer(sq, sq)
        beta = rho * sq[None, :] / sq[:, None]
        res = y - y @ beta.T
        rss = np.sum(res * res, axis=0)
        w = 1.0 if m == "space1" else d
        return 0.5 * float(np.sum(-n * np.log(d) + w * rss))
    if m == "symlasso":
        alpha = 1.0 / d
        res = y + (y @ off) * alpha
        rss = np.sum(res * res, axis=0)
        return 0.5 * float(np.sum(n * np.log(alpha) + rss / alpha))
    # splice: d_ii^2 = 1/omega_ii, beta_ij = -omega_ij / omega_ii
    d2 = 1.0 / d
    beta = -off / d[:, None]
    res = y - y @ beta.T
    rss = np.sum(res * res, axis=0)
    return 0.5 * float(np.sum(n * np.log(d2) + rss / d2))


def gaussian_loglik(omega, s, n=None) -> float:
    """Negative Gaussian log-likelihood ``n/2 * (-log det omega + tr(S omega))``."""
    s, n_cov = as_cov(s)
    n = n_cov if n is None else n
    omega = np.asarray(omega, dtype=float)
    try:
        chol = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("omega is not positive definite") from exc
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return 0.5 * n * (-logdet + float(np.sum(s * omega)))


def symlasso_objective(alpha, omega_off, data, lam) -> float:
    """SYMLASSO objective in its native ``(alpha, off-diagonal omega)`` coordinates."""
    y = as_values(data)
    n = y.shape[0]
    alpha = np.asarray(alpha, dtype=float)
    off = np.array(omega_off, dtype=float)
    np.fill_diagonal(off, 0.0)
    res = y + (y @ off) * alpha
    rss = np.sum(res * res, axis=0)
    return 0.5 * float(np.sum(n * np.log(alpha) + rss / alpha)) + lam * np.abs(np.triu(off, 1)).sum()


def splice_objective(beta, d, data, lam) -> float:
    """SPLICE objective in ``(B, D)`` coordinates; ``beta[i, j]`` regresses Y_i on Y_j."""
    y = as_values(data)
    n = y.shape[0]
    beta = np.array(beta, dtype=float)
    np.fill_diagonal(beta, 0.0)
    d2 = np.asarray(d, dtype=float) ** 2
    res = y - y @ beta.T
    rss = np.sum(res * res, axis=0)
    return 0.5 * float(np.sum(n * np.log(d2) + rss / d2)) + lam * np.abs(np.triu(beta, 1)).sum()

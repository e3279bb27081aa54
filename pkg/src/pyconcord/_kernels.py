"""Compiled sweep kernels.

Every kernel mutates its array arguments in place and is single-threaded so
that a fit is deterministic.  ``nogil`` lets independent fits run in
threads.
"""

import math

import numpy as np
from numba import njit

from .linalg import _soft


@njit(cache=True, nogil=True)
def _dot(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        acc += a[k] * b[k]
    return acc


@njit(cache=True, nogil=True)
def concord_sweep_naive(omega, s, n, lam, logw):
    """One Gauss-Seidel sweep over off-diagonals then diagonals.

    ``logw`` is the weight on ``-n log(omega_ii)``: 1 for the corrected
    objective, 0.5 for the uncorrected one.  Returns the largest change in
    the objective over the individual coordinate updates.
    """
    p = omega.shape[0]
    eta = lam / n
    worst = -np.inf
    for i in range(p - 1):
        for j in range(i + 1, p):
            old = omega[i, j]
            num = (_dot(omega[i], s[j]) - old * s[j, j]) + (_dot(omega[j], s[i]) - old * s[i, i])
            denom = s[i, i] + s[j, j]
            new = _soft(-num, eta) / denom
            omega[i, j] = new
            omega[j, i] = new
            dq = n * (0.5 * denom * (new * new - old * old) + num * (new - old)) + lam * (abs(new) - abs(old))
            if dq > worst:
                worst = dq
    for i in range(p):
        old = omega[i, i]
        sii = s[i, i]
        t = _dot(omega[i], s[i]) - old * sii
        new = (-t + math.sqrt(t * t + 4.0 * logw * sii)) / (2.0 * sii)
        omega[i, i] = new
        dq = -logw * n * math.log(new / old) + n * (0.5 * sii * (new * new - old * old) + t * (new - old))
        if dq > worst:
            worst = dq
    return worst


@njit(cache=True, nogil=True)
def concord_sweep_cached(omega, yt, r, sdiag, n, lam, logw):
    """Residual-cached sweep: every coordinate costs O(n).

    ``yt`` is the p x n transposed data and ``r`` the p x n residual cache
    with ``r[m] = Y_m + sum_{k != m} omega_mk / omega_mm * Y_k``.
    """
    p = omega.shape[0]
    eta = lam / n
    worst = -np.inf
    for i in range(p - 1):
        for j in range(i + 1, p):
            old = omega[i, j]
            yj_ri = _dot(yt[j], r[i]) / n
            yi_rj = _dot(yt[i], r[j]) / n
            num = (omega[i, i] * yj_ri - old * sdiag[j]) + (omega[j, j] * yi_rj - old * sdiag[i])
            denom = sdiag[i] + sdiag[j]
            new = _soft(-num, eta) / denom
            delta = new - old
            if delta != 0.0:
                omega[i, j] = new
                omega[j, i] = new
                fi = delta / omega[i, i]
                fj = delta / omega[j, j]
                for k in range(r.shape[1]):
                    r[i, k] += fi * yt[j, k]
                    r[j, k] += fj * yt[i, k]
            dq = n * (0.5 * denom * (new * new - old * old) + num * (new - old)) + lam * (abs(new) - abs(old))
            if dq > worst:
                worst = dq
    for i in range(p):
        old = omega[i, i]
        sii = sdiag[i]
        t = old * _dot(yt[i], r[i]) / n - old * sii
        new = (-t + math.sqrt(t * t + 4.0 * logw * sii)) / (2.0 * sii)
        if new != old:
            omega[i, i] = new
            ratio = old / new
            for k in range(r.shape[1]):
                r[i, k] = (r[i, k] - yt[i, k]) * ratio + yt[i, k]
        dq = -logw * n * math.log(new / old) + n * (0.5 * sii * (new * new - old * old) + t * (new - old))
        if dq > worst:
            worst = dq
    return worst


@njit(cache=True, nogil=True)
def space_rho_sweeps(rho, om, w, yt, e, gdiag, lam, tol, max_sweeps):
    """Cyclic coordinate descent for the joint partial-correlation lasso.

    ``e[i]`` holds the row-i regression residual
    ``Y_i - sum_k rho_ik sqrt(om_k / om_i) Y_k`` and is kept in sync.
    Returns the number of sweeps run.
    """
    p = rho.shape[0]
    nobs = yt.shape[1]
    for sweep in range(max_sweeps):
        biggest = 0.0
        for i in range(p - 1):
            for j in range(i + 1, p):
                cij = math.sqrt(om[j] / om[i])
                cji = 1.0 / cij
                old = rho[i, j]
                a = w[i] * cij * cij * gdiag[j] + w[j] * cji * cji * gdiag[i]
                b = w[i] * cij * (_dot(yt[j], e[i]) + old * cij * gdiag[j]) + w[j] * cji * (
                    _dot(yt[i], e[j]) + old * cji * gdiag[i]
                )
                new = _soft(b, lam) / a
                d = new - old
                if d != 0.0:
                    rho[i, j] = new
                    rho[j, i] = new
                    for k in range(nobs):
                        e[i, k] -= d * cij * yt[j, k]
                        e[j, k] -= d * cji * yt[i, k]
                    if abs(d) > biggest:
                        biggest = abs(d)
        if biggest < tol:
            return sweep + 1
    return max_sweeps


@njit(cache=True, nogil=True)
def positive_quadratic_cd(a, z, nlog, tol, max_sweeps):
    """Minimise ``-nlog * sum log z_i + z'Az / 2`` over z > 0 coordinatewise."""
    p = z.shape[0]
    for sweep in range(max_sweeps):
        biggest = 0.0
        for i in range(p):
            t = _dot(a[i], z) - a[i, i] * z[i]
            new = (-t + math.sqrt(t * t + 4.0 * a[i, i] * nlog)) / (2.0 * a[i, i])
            d = abs(new - z[i])
            if d > biggest:
                biggest = d
            z[i] = new
        if biggest < tol * (1.0 + np.max(np.abs(z))):
            return sweep + 1
    return max_sweeps

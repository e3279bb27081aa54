"""Synthetic sparse precision matrices, samplers and support-recovery metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleTarget, InvalidDf, NotPositiveDefinite
from .linalg import Dataset


@dataclass(frozen=True)
class GroundTruth:
    omega: np.ndarray
    support: frozenset
    density: float
    condition_number: float

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.omega)

    def standardized_omega(self) -> np.ndarray:
        """Precision of the unit-variance rescaled variables, ``D omega D`` with ``D = sqrt(diag(Sigma))``."""
        sd = np.sqrt(np.diag(self.covariance))
        return self.omega * np.outer(sd, sd)

    def edge_list(self):
        """``(i, j, value)`` rows for i <= j with nonzero value (0-based)."""
        p = self.p
        return [(i, j, float(self.omega[i, j])) for i in range(p) for j in range(i, p) if self.omega[i, j] != 0]

    @classmethod
    def from_matrix(cls, omega) -> "GroundTruth":
        omega = np.asarray(omega, dtype=float)
        p = omega.shape[0]
        support = frozenset((i, j) for i in range(p) for j in range(i + 1, p) if omega[i, j] != 0)
        eig = np.linalg.eigvalsh(omega)
        if eig[0] <= 0:
            raise NotPositiveDefinite("ground-truth precision must be positive definite")
        pairs = p * (p - 1) / 2
        return cls(omega, support, len(support) / pairs if pairs else 0.0, float(eig[-1] / eig[0]))


def _shift_for_condition(eig, cond_target, steps=200):
    """Bisect ``c`` so that ``(eig_max + c) / (eig_min + c) == cond_target``."""
    lo_eig, hi_eig = eig[0], eig[-1]
    if hi_eig - lo_eig <= 1e-12 * max(1.0, abs(hi_eig)):
        raise InfeasibleTarget("all eigenvalues coincide; a diagonal shift cannot change the condition number")

    def cond(c):
        return (hi_eig + c) / (lo_eig + c)

    # cond decreases from +inf at c -> -lo_eig to 1 as c -> inf
    lo = -lo_eig + 1e-300
    hi = max(1.0, abs(hi_eig))
    while cond(hi) > cond_target:
        hi *= 2.0
    lo = -lo_eig + (hi + lo_eig) * 1e-16
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if cond(mid) > cond_target:
            lo = mid
        else:
            hi = mid
        if abs(cond(hi) - cond_target) <= 1e-12 * cond_target:
            return hi
    c = 0.5 * (lo + hi)
    if abs(cond(c) - cond_target) > 1e-3 * cond_target:
        raise InfeasibleTarget(f"condition number {cond_target} not reached in {steps} bisection steps")
    return c


def gen_sparse_precision(p, density, cond_target, rng_seed, value_range=(0.3, 0.7)) -> GroundTruth:
    """Random sparse positive definite precision matrix with a given condition number.

    The support is drawn uniformly among off-diagonal pairs; nonzero values
    are uniform on ``+-value_range``; the diagonal starts at the absolute
    row sums and is then shifted by a common constant, found by bisection,
    to hit ``cond_target``.  With no edges the diagonal takes the two values
    1 and ``cond_target``.
    """
    if not 0 < density < 1:
        raise ValueError("density must lie in (0, 1)")
    if not cond_target > 1:
        raise ValueError("cond_target must exceed 1")
    rng = np.random.default_rng(rng_seed)
    iu = np.triu_indices(p, 1)
    n_pairs = iu[0].size
    n_edges = int(round(density * n_pairs))
    chosen = np.sort(rng.choice(n_pairs, size=n_edges, replace=False)) if n_edges else np.empty(0, int)
    lo, hi = value_range
    values = rng.uniform(lo, hi, size=n_edges) * rng.choice([-1.0, 1.0], size=n_edges)

    omega = np.zeros((p, p))
    rows, cols = iu[0][chosen], iu[1][chosen]
    omega[rows, cols] = values
    omega[cols, rows] = values
    if n_edges == 0:
        if p < 2:
            raise InfeasibleTarget("a 1 x 1 matrix always has condition number 1")
        diag = np.ones(p)
        diag[rng.permutation(p)[: p // 2]] = cond_target
        np.fill_diagonal(omega, diag)
    else:
        np.fill_diagonal(omega, np.abs(omega).sum(axis=1))
        eig = np.linalg.eigvalsh(omega)
        c = _shift_for_condition(eig, cond_target)
        omega[np.diag_indices(p)] += c
    support = frozenset(zip(rows.tolist(), cols.tolist()))
    eig = np.linalg.eigvalsh(omega)
    if eig[0] <= 0:
        raise InfeasibleTarget("generated matrix is not positive definite")
    return GroundTruth(omega, support, n_edges / n_pairs if n_pairs else 0.0, float(eig[-1] / eig[0]))


def _omega_of(truth):
    return truth.omega if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=float)


def _sigma_factor(omega):
    try:
        np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("precision matrix is not positive definite") from exc
    sigma = np.linalg.inv(omega)
    sigma = 0.5 * (sigma + sigma.T)
    return np.linalg.cholesky(sigma)


def sample_gaussian(truth, n, rng_seed) -> Dataset:
    """n i.i.d. rows from ``N(0, omega^-1)`` (not standardized)."""
    chol = _sigma_factor(_omega_of(truth))
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((n, chol.shape[0]))
    return Dataset(z @ chol.T, "none")


def sample_mvt(truth, n, df=5.0, rng_seed=None) -> Dataset:
    """n i.i.d. multivariate-t rows whose covariance equals ``omega^-1``.

    The scale matrix is ``Sigma (df - 2) / df``.
    """
    if not df > 2:
        raise InvalidDf(f"degrees of freedom must exceed 2, got {df}")
    if rng_seed is None:
        raise ValueError("an explicit rng_seed is required")
    chol = _sigma_factor(_omega_of(truth)) * np.sqrt((df - 2.0) / df)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((n, chol.shape[0]))
    w = rng.chisquare(df, size=n)
    return Dataset((z @ chol.T) / np.sqrt(w / df)[:, None], "none")


@dataclass(frozen=True)
class SupportMetrics:
    tp: int
    fp: int
    tn: int
    fn: int
    tpr: float
    fpr: float
    # sign match over true-positive pairs
    sign_agreement: float
    # sign match over all true edges (missed edges count as mismatches)
    sign_recovery: float


def support_metrics(omega_hat, truth, zero_tol=1e-12) -> SupportMetrics:
    """Compare the off-diagonal support and signs of an estimate with the truth."""
    est = np.asarray(omega_hat, dtype=float)
    true = _omega_of(truth)
    if est.shape != true.shape:
        raise ValueError("estimate and truth must have the same shape")
    iu = np.triu_indices(true.shape[0], 1)
    e, t = est[iu], true[iu]
    est_on = np.abs(e) > zero_tol
    true_on = t != 0
    tp = int(np.sum(est_on & true_on))
    fp = int(np.sum(est_on & ~true_on))
    tn = int(np.sum(~est_on & ~true_on))
    fn = int(np.sum(~est_on & true_on))
    n_true, n_false = tp + fn, fp + tn
    both = est_on & true_on
    same_sign = np.sign(e) == np.sign(t)
    return SupportMetrics(
        tp,
        fp,
        tn,
        fn,
        tp / n_true if n_true else 0.0,
        fp / n_false if n_false else 0.0,
        float(np.mean(same_sign[both])) if tp else float("nan"),
        float(np.mean(same_sign[true_on] & est_on[true_on])) if n_true else float("nan"),
    )


@dataclass(frozen=True)
class RocCurve:
    points: np.ndarray
    auc_partial_normalized: float
    fpr_max: float


def _as_points(path, truth):
    if hasattr(path, "fits"):
        path = [f.omega for f in path.fits]
    pts = []
    for item in path:
        arr = np.asarray(item, dtype=float)
        if arr.shape == (2,):
            pts.append((float(arr[0]), float(arr[1])))
        else:
            m = support_metrics(arr, truth)
            pts.append((m.fpr, m.tpr))
    return pts


def roc_auc_partial(path, truth=None, fpr_max=0.15) -> RocCurve:
    """Trapezoidal ROC area over ``FPR in [0, fpr_max]``, divided by ``fpr_max``.

    ``path`` is a PathResult, a list of estimates, or a list of ``(fpr, tpr)``
    pairs.  The curve is anchored at (0, 0), sorted by FPR, linearly
    interpolated at ``fpr_max`` and held flat beyond its last point.
    """
    pts = sorted(set(_as_points(path, truth)) | {(0.0, 0.0)})
    if not pts:
        raise ValueError("empty path")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    inside = xs <= fpr_max
    cx, cy = list(xs[inside]), list(ys[inside])
    if np.any(~inside):
        k = int(np.argmax(~inside))
        x0, y0, x1, y1 = xs[k - 1], ys[k - 1], xs[k], ys[k]
        cx.append(fpr_max)
        cy.append(y0 + (y1 - y0) * (fpr_max - x0) / (x1 - x0))
    elif cx[-1] < fpr_max:
        cx.append(fpr_max)
        cy.append(cy[-1])
    cx, cy = np.array(cx), np.array(cy)
    area = float(np.sum(np.diff(cx) * (cy[1:] + cy[:-1]) / 2.0))
    return RocCurve(np.column_stack([cx, cy]), area / fpr_max, fpr_max)

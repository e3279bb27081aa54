"""Minimum-variance rebalancing backtest with turnover, cost and wealth accounting.

Period ``k`` covers days ``T_{k-1}+1 .. T_k`` (1-based).  Its weights are
estimated from the ``N_est`` returns ending on day ``T_{k-1}``; periods
without a full estimation window are skipped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .concord import ConcordConfig, concord_fit
from .exceptions import (
    DegenerateBudgetDenominator,
    NonPositiveDefiniteFallback,
    PyConcordError,
    WindowEstimationFailed,
    ZeroRisk,
)
from .linalg import standardize
from .selection import default_grid, select_lambda_cv

TRADING_DAYS = 252
ESTIMATORS = ("concord_cv", "sample")
DRIFT_MODES = ("holding", "printed")


@dataclass(frozen=True)
class ReturnsPanel:
    returns: np.ndarray
    dates: tuple = ()
    tickers: tuple = ()

    def __post_init__(self):
        r = np.array(self.returns, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        if r.ndim != 2 or not np.all(np.isfinite(r)):
            raise ValueError("returns must be a finite T x p matrix")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        dates = tuple(self.dates) if len(self.dates) else tuple(str(t + 1) for t in range(r.shape[0]))
        tickers = tuple(self.tickers) if len(self.tickers) else tuple(f"x{i + 1}" for i in range(r.shape[1]))
        if len(dates) != r.shape[0] or len(tickers) != r.shape[1]:
            raise ValueError("dates and tickers must match the returns shape")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "tickers", tickers)

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def p(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class RebalancePlan:
    """Period boundaries ``0 = T_0 < T_1 < ... < T_K`` and the estimation horizon."""

    boundaries: tuple
    n_est: int

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        if len(b) < 2 or b[0] != 0 or any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise ValueError("boundaries must start at 0 and increase strictly")
        if self.n_est < 2:
            raise ValueError("n_est must be at least 2")
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def every(cls, T, n_days, n_est) -> "RebalancePlan":
        """Rebalance every ``n_days`` days; the last period may be shorter."""
        b = list(range(0, T, n_days)) + [T]
        return cls(tuple(b), n_est)

    @property
    def lengths(self) -> tuple:
        b = self.boundaries
        return tuple(b1 - b0 for b0, b1 in zip(b, b[1:]))

    def executable(self):
        """1-based indices of the periods that have a full estimation window."""
        return [k for k in range(1, len(self.boundaries)) if self.boundaries[k - 1] >= self.n_est]


@dataclass
class BacktestReport:
    periods: list
    weights: np.ndarray
    turnover: np.ndarray
    transaction_cost: np.ndarray
    borrowing_cost: np.ndarray
    short_side: np.ndarray
    wealth: np.ndarray
    daily_returns: np.ndarray
    summary: dict
    lambdas: list = field(default_factory=list)

    def to_dict(self):
        return {
            "periods": self.periods,
            "weights": self.weights.tolist(),
            "turnover": self.turnover.tolist(),
            "transaction_cost": self.transaction_cost.tolist(),
            "borrowing_cost": self.borrowing_cost.tolist(),
            "short_side": self.short_side.tolist(),
            "lambdas": self.lambdas,
            "summary": self.summary,
        }


def minvar_weights(omega_hat) -> np.ndarray:
    """``w = Omega 1 / (1' Omega 1)``, renormalised so the weights sum to one.

    An estimate with a non-positive eigenvalue is shifted to
    ``Omega + (|lambda_min| + 1e-6) I`` first, with a warning.
    """
    omega = np.asarray(omega_hat, dtype=float)
    omega = 0.5 * (omega + omega.T)
    lam_min = float(np.linalg.eigvalsh(omega)[0])
    if lam_min <= 0:
        warnings.warn(
            f"precision estimate has smallest eigenvalue {lam_min:.3g}; shifting the diagonal",
            NonPositiveDefiniteFallback,
            stacklevel=2,
        )
        omega = omega + (abs(lam_min) + 1e-6) * np.eye(omega.shape[0])
    raw = omega.sum(axis=1)
    denom = raw.sum()
    if not np.isfinite(denom) or denom <= 1e-12:
        raise DegenerateBudgetDenominator(f"1' Omega 1 = {denom:.3g}")
    w = raw / denom
    return w / w.sum()


def growth_factors(period_returns) -> np.ndarray:
    """Per-asset ``prod_t (1 + r_it)`` over the rows of ``period_returns``."""
    r = np.atleast_2d(np.asarray(period_returns, dtype=float))
    return np.prod(1.0 + r, axis=0)


def turnover(w_k, w_prev, period_returns) -> float:
    """``sum_i |w_ik - prod_t(1 + r_it) w_i(k-1)|`` over the supplied drift returns."""
    w_k = np.asarray(w_k, dtype=float)
    w_prev = np.asarray(w_prev, dtype=float)
    if len(np.asarray(period_returns)) == 0:
        drift = np.ones_like(w_prev)
    else:
        drift = growth_factors(period_returns)
    return float(np.abs(w_k - drift * w_prev).sum())


def short_exposure(w) -> float:
    """``sum_i |min(w_i, 0)|``."""
    return float(np.abs(np.minimum(np.asarray(w, dtype=float), 0.0)).sum())


def short_side(w) -> float:
    """Share of gross exposure held short, in [0, 1]."""
    w = np.asarray(w, dtype=float)
    gross = np.abs(w).sum()
    return short_exposure(w) / gross if gross > 0 else 0.0


def costs(to, short_prev, l_prev, r_c, r_b):
    """Return ``(TC, BC)``.

    ``TC = r_c TO`` and ``BC = ((1 + r_b)^L_prev - 1) short_prev`` where
    ``short_prev`` is the short exposure ``sum |min(w_prev, 0)|`` of the
    previous period and ``r_b`` is a daily rate.
    """
    if r_c < 0 or r_b < 0:
        raise ValueError("cost rates must be non-negative")
    return r_c * to, ((1.0 + r_b) ** l_prev - 1.0) * short_prev


def apr_to_daily(apr, days=TRADING_DAYS) -> float:
    """Daily compounding rate equivalent to an annual rate: ``(1 + apr)^(1/days) - 1``."""
    return (1.0 + apr) ** (1.0 / days) - 1.0


def wealth_step(w_prev_wealth, r_t, w_k, first_day, tc=0.0, bc=0.0) -> float:
    """One day of the wealth recursion; costs are charged on the first day of a period."""
    ret = float(np.dot(np.asarray(r_t, dtype=float), np.asarray(w_k, dtype=float)))
    if first_day:
        ret -= tc + bc
    return w_prev_wealth * (1.0 + ret)


def sharpe_ratio(r_p, r_f, sigma_p) -> float:
    if sigma_p == 0:
        raise ZeroRisk("realized risk is zero")
    return (r_p - r_f) / sigma_p


def performance_summary(daily_returns, r_f=0.0, periods_per_year=TRADING_DAYS) -> dict:
    """Realized return, risk (1/T convention) and Sharpe ratio.

    ``r_f`` is an annual rate.  Raw values use the daily rate
    ``r_f / periods_per_year``; annualised values scale the mean by
    ``periods_per_year`` and the risk by its square root.
    """
    x = np.asarray(daily_returns, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two daily returns")
    r_p = float(x.mean())
    sigma_p = float(np.sqrt(np.mean((x - r_p) ** 2)))
    if sigma_p == 0:
        raise ZeroRisk("realized risk is zero")
    r_ann = r_p * periods_per_year
    sigma_ann = sigma_p * math.sqrt(periods_per_year)
    return {
        "r_p": r_p,
        "sigma_p": sigma_p,
        "sr": sharpe_ratio(r_p, r_f / periods_per_year, sigma_p),
        "r_p_annual": r_ann,
        "sigma_p_annual": sigma_ann,
        "sr_annual": sharpe_ratio(r_ann, r_f, sigma_ann),
    }


def sample_precision(window) -> np.ndarray:
    """Inverse of the mean-centred 1/N sample covariance."""
    x = np.asarray(window, dtype=float)
    c = x - x.mean(axis=0)
    s = c.T @ c / x.shape[0]
    return np.linalg.inv(0.5 * (s + s.T))


def concord_cv_precision(window, lambdas=None, n_lambdas=50, folds=5, config=None):
    """CONCORD precision on the raw return scale with lambda picked by contiguous K-fold risk.

    The window is standardized (population sd) before selection and the
    fitted estimate is mapped back with ``D^-1 Omega D^-1``.  Returns
    ``(omega_raw, lam)``.
    """
    ds = standardize(window, "std_dev")
    config = ConcordConfig() if config is None else config
    if ds.p == 1:
        return 1.0 / ds.column_scales[None, :] ** 2, 0.0
    grid = default_grid(ds, n_lambdas) if lambdas is None else np.asarray(lambdas, dtype=float)
    if grid.size == 1:
        lam = float(grid[0])
    else:
        lam, _ = select_lambda_cv(ds, grid, folds, config)
    omega = concord_fit(ds, config.replace(lam=lam)).omega
    return omega / np.outer(ds.column_scales, ds.column_scales), lam


def backtest(
    panel,
    plan,
    estimator="sample",
    r_c=0.0,
    r_b=0.0,
    r_f=0.0,
    lambda_grid=None,
    n_lambdas=50,
    folds=5,
    drift="holding",
    config=None,
) -> BacktestReport:
    """Run the rebalancing backtest.

    Parameters
    ----------
    panel : ReturnsPanel
    plan : RebalancePlan
    estimator : {"sample", "concord_cv"}
    r_c : float
        Transaction cost per unit turnover.
    r_b : float
        Daily borrowing rate (see :func:`apr_to_daily`).
    r_f : float
        Annual risk-free rate for the Sharpe ratios.
    lambda_grid : array-like, optional
        Decreasing penalties for ``concord_cv``; one value fixes lambda.
    drift : {"holding", "printed"}
        Returns used to drift the previous weights inside the turnover.
        ``"holding"`` uses the days the previous weights were actually
        held; ``"printed"`` uses the days of the new period.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if drift not in DRIFT_MODES:
        raise ValueError(f"unknown drift mode {drift!r}")
    r = panel.returns
    b = plan.boundaries
    if b[-1] > panel.T:
        raise ValueError(f"plan ends on day {b[-1]} but the panel has {panel.T} days")
    periods = plan.executable()
    if not periods:
        raise ValueError("no period has a full estimation window")

    weights, tos, tcs, bcs, sss, lams, daily = [], [], [], [], [], [], []
    wealth = [1.0]
    w_prev = np.zeros(panel.p)
    for k in periods:
        start, end = b[k - 1], b[k]
        window = r[start - plan.n_est : start]
        try:
            if estimator == "sample":
                omega, lam = sample_precision(window), None
            else:
                omega, lam = concord_cv_precision(window, lambda_grid, n_lambdas, folds, config)
            w = minvar_weights(omega)
        except (PyConcordError, np.linalg.LinAlgError, ValueError) as exc:
            raise WindowEstimationFailed(k, exc) from exc

        if drift == "holding":
            held = r[b[k - 2] : start] if k >= 2 else r[0:0]
        else:
            held = r[start:end]
        to = turnover(w, w_prev, held)
        first = k == periods[0]
        l_prev = 0 if first else b[k - 1] - b[k - 2]
        tc, bc = costs(to, short_exposure(w_prev), l_prev, r_c, r_b)

        for t in range(start, end):
            daily.append(float(r[t] @ w))
            wealth.append(wealth_step(wealth[-1], r[t], w, t == start, tc, bc))

        weights.append(w)
        tos.append(to)
        tcs.append(tc)
        bcs.append(bc)
        sss.append(short_side(w))
        lams.append(lam)
        w_prev = w

    summary = performance_summary(daily, r_f)
    sarr = np.array(sss)
    summary["short_side_mean"] = float(sarr.mean())
    summary["short_side_se"] = float(np.sqrt(np.mean((sarr - sarr.mean()) ** 2)))
    summary["turnover_mean"] = float(np.mean(tos))
    summary["final_wealth"] = wealth[-1]
    return BacktestReport(
        periods=periods,
        weights=np.array(weights),
        turnover=np.array(tos),
        transaction_cost=np.array(tcs),
        borrowing_cost=np.array(bcs),
        short_side=sarr,
        wealth=np.array(wealth),
        daily_returns=np.array(daily),
        summary=summary,
        lambdas=lams,
    )

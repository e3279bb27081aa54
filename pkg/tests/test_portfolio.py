import math
import warnings

import hand_panel
import numpy as np
import pytest

from pyconcord.exceptions import (
    DegenerateBudgetDenominator,
    NonPositiveDefiniteFallback,
    WindowEstimationFailed,
    ZeroRisk,
)
from pyconcord.portfolio import (
    RebalancePlan,
    ReturnsPanel,
    apr_to_daily,
    backtest,
    costs,
    minvar_weights,
    performance_summary,
    sharpe_ratio,
    short_side,
    turnover,
    wealth_step,
)


def test_minvar_trivial():
    assert np.allclose(minvar_weights(np.eye(4)), 0.25)
    assert np.allclose(minvar_weights(np.diag([1.0, 3.0])), [0.25, 0.75])


def test_minvar_matches_kkt(rng):
    a = rng.normal(size=(6, 6))
    sigma = a @ a.T + 0.5 * np.eye(6)
    # minimise w' Sigma w subject to 1'w = 1
    kkt = np.block([[2 * sigma, np.ones((6, 1))], [np.ones((1, 6)), np.zeros((1, 1))]])
    sol = np.linalg.solve(kkt, np.r_[np.zeros(6), 1.0])
    w = minvar_weights(np.linalg.inv(sigma))
    assert np.max(np.abs(w - sol[:6])) < 1e-9
    assert abs(w.sum() - 1) < 1e-12
    assert np.allclose(minvar_weights(7.0 * np.linalg.inv(sigma)), w, atol=1e-14)


def test_minvar_fallback_and_degenerate():
    om = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.warns(NonPositiveDefiniteFallback):
        w = minvar_weights(om)
    assert w.sum() == pytest.approx(1.0)
    with pytest.raises(DegenerateBudgetDenominator):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            minvar_weights(np.array([[1.0, -0.999999], [-0.999999, 1.0]]) * 1e-7)


def test_turnover_cases():
    w1 = np.array([0.7, 0.3])
    assert turnover(w1, np.zeros(2), np.zeros((0, 2))) == pytest.approx(1.0)
    assert turnover(w1, w1, np.zeros((3, 2))) == 0.0
    # drift: asset 1 +10%, asset 2 -5% over the period
    w0 = np.array([0.5, 0.5])
    r = np.array([[0.10, -0.05]])
    assert turnover(w1, w0, r) == pytest.approx(abs(0.7 - 0.55) + abs(0.3 - 0.475))


def test_costs():
    assert costs(0.8, 0.0, 20, 0.0, 0.001) == (0.0, 0.0)
    rb = apr_to_daily(0.07)
    assert rb == pytest.approx(1.07 ** (1 / 252) - 1)
    tc, bc = costs(0.5, 0.1, 20, 0.002, rb)
    assert tc == pytest.approx(0.001)
    assert bc == pytest.approx((1.07 ** (20 / 252) - 1) * 0.1, rel=1e-12)
    with pytest.raises(ValueError):
        costs(1.0, 0.0, 1, -0.1, 0.0)


def test_wealth_step():
    assert wealth_step(1.0, [0.0], [1.0], True, 0.01, 0.002) == pytest.approx(0.988)
    assert wealth_step(2.0, [0.05, 0.0], [0.5, 0.5], False, 0.5, 0.5) == pytest.approx(2.05)


def test_performance_summary():
    with pytest.raises(ZeroRisk):
        performance_summary([0.01, 0.01, 0.01])
    assert sharpe_ratio(0.10, 0.05, 0.25) == pytest.approx(0.2)
    x = np.array([0.01, -0.02, 0.005, 0.03])
    s = performance_summary(x, r_f=0.0252)
    mean = sum(x) / 4
    sd = math.sqrt(sum((v - mean) ** 2 for v in x) / 4)
    assert s["r_p"] == pytest.approx(mean)
    assert s["sigma_p"] == pytest.approx(sd)
    assert s["sr"] == pytest.approx((mean - 0.0001) / sd)
    assert s["sr_annual"] == pytest.approx((252 * mean - 0.0252) / (math.sqrt(252) * sd))


def test_short_side():
    assert short_side([1.2, -0.2]) == pytest.approx(0.2 / 1.4)
    assert short_side([0.5, 0.5]) == 0.0


def test_plan():
    plan = RebalancePlan.every(10, 4, 3)
    assert plan.boundaries == (0, 4, 8, 10)
    assert plan.lengths == (4, 4, 2)
    assert plan.executable() == [2, 3]
    with pytest.raises(ValueError):
        RebalancePlan((0, 3, 3), 2)


def run_hand_panel():
    panel = ReturnsPanel(np.array(hand_panel.returns_float()))
    plan = RebalancePlan(hand_panel.BOUNDARIES, hand_panel.N_EST)
    return backtest(
        panel,
        plan,
        "sample",
        r_c=float(hand_panel.R_C),
        r_b=float(hand_panel.R_B),
        r_f=float(hand_panel.R_F),
    )


def test_hand_panel_matches_oracle():
    rep = run_hand_panel()
    o = hand_panel.oracle()
    assert rep.periods == o["periods"]
    assert np.max(np.abs(rep.weights - np.array(o["weights"], dtype=float))) < 1e-12
    for got, key in ((rep.turnover, "to"), (rep.transaction_cost, "tc"), (rep.borrowing_cost, "bc"),
                     (rep.short_side, "ss"), (rep.wealth, "wealth")):
        assert np.max(np.abs(got - np.array(o[key], dtype=float))) < 1e-12
    assert abs(rep.summary["r_p"] - float(o["r_p"])) < 1e-12
    assert abs(rep.summary["sigma_p"] - o["sigma_p"]) < 1e-12
    assert abs(rep.summary["sr"] - o["sr"]) < 1e-12
    assert np.allclose(rep.weights.sum(axis=1), 1.0, atol=1e-12)


def test_single_asset_backtest(rng):
    r = rng.normal(0.001, 0.01, (30, 1))
    rep = backtest(ReturnsPanel(r), RebalancePlan.every(30, 5, 10), "sample", r_c=0.001)
    assert np.all(rep.weights == 1.0)
    expected = 1.0
    t0 = 10
    for k, t in enumerate(range(t0, 30)):
        period = (t - t0) // 5
        cost = rep.transaction_cost[period] if (t - t0) % 5 == 0 else 0.0
        expected *= 1 + r[t, 0] - cost
    assert rep.wealth[-1] == pytest.approx(expected, rel=1e-12)


def test_zero_cost_log_wealth(rng):
    r = rng.normal(0.0005, 0.01, (20, 3))
    rep = backtest(ReturnsPanel(r), RebalancePlan((0, 10, 20), 10), "sample")
    w = rep.weights[0]
    assert math.log(rep.wealth[-1]) == pytest.approx(sum(math.log(1 + r[t] @ w) for t in range(10, 20)))


def test_concord_huge_lambda_gives_inverse_variance_weights(rng):
    r = rng.normal(0, 1, (60, 3)) * np.array([0.01, 0.02, 0.015])
    plan = RebalancePlan((0, 30, 45, 60), 30)
    rep = backtest(ReturnsPanel(r), plan, "concord_cv", lambda_grid=[1e9])
    for k, start in enumerate((30, 45)):
        window = r[start - 30 : start]
        inv_var = 1 / window.var(axis=0)
        assert np.allclose(rep.weights[k], inv_var / inv_var.sum(), atol=1e-10)


def test_concord_cv_backtest_runs(rng):
    r = rng.normal(0, 0.01, (80, 4)) @ (np.eye(4) + 0.3)
    rep = backtest(ReturnsPanel(r), RebalancePlan.every(80, 10, 40), "concord_cv", n_lambdas=6)
    assert len(rep.lambdas) == 4 and all(lam > 0 for lam in rep.lambdas)
    assert np.allclose(rep.weights.sum(axis=1), 1.0, atol=1e-12)


def test_permutation_invariance(rng):
    r = rng.normal(0.0005, 0.01, (40, 3))
    perm = [2, 0, 1]
    plan = RebalancePlan.every(40, 10, 10)
    a = backtest(ReturnsPanel(r), plan, "sample", r_c=0.001, r_b=0.0002)
    b = backtest(ReturnsPanel(r[:, perm]), plan, "sample", r_c=0.001, r_b=0.0002)
    assert np.allclose(a.weights[:, perm], b.weights, atol=1e-12)
    assert np.allclose(a.wealth, b.wealth, atol=1e-12)


def test_window_failure_is_reported():
    r = np.zeros((10, 2))
    with pytest.raises(WindowEstimationFailed) as err:
        backtest(ReturnsPanel(r), RebalancePlan((0, 5, 10), 5), "sample")
    assert err.value.period == 2


def test_panel_validation():
    with pytest.raises(ValueError):
        ReturnsPanel(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        ReturnsPanel(np.zeros((3, 2)), tickers=("a",))

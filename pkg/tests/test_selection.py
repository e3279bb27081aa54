import json
import math

import numpy as np
import pytest
from conftest import random_data
from sklearn.base import clone

from pyconcord.concord import ConcordConfig, concord_fit
from pyconcord.exceptions import FoldTooSmall, ZeroRSS
from pyconcord.selection import (
    ConcordBIC,
    ConcordCV,
    PathResult,
    bic_score,
    cv_predictive_risk,
    cv_risk_path,
    default_grid,
    lambda_max,
    make_folds,
    node_rss,
    penalty_path,
    select_lambda_bic,
    select_lambda_cv,
)


def is_diagonal(m):
    return np.count_nonzero(m - np.diag(np.diag(m))) == 0


def test_lambda_max_is_the_diagonal_threshold(rng):
    y = random_data(rng, 30, 6)
    top = lambda_max(y)
    assert is_diagonal(concord_fit(y, lam=top * (1 + 1e-9)).omega)
    assert not is_diagonal(concord_fit(y, lam=top * 0.98).omega)


def test_default_grid(rng):
    y = random_data(rng, 20, 4)
    grid = default_grid(y)
    assert grid.size == 50
    assert grid[0] == pytest.approx(lambda_max(y))
    assert grid[-1] == pytest.approx(lambda_max(y) / 100)
    assert np.allclose(np.diff(np.log(grid)), np.log(grid[1] / grid[0]))


def test_path_rejects_bad_grid(rng):
    y = random_data(rng, 10, 3)
    for bad in ([1.0, 2.0], [], [1.0, 1.0], [1.0, -1.0]):
        with pytest.raises(ValueError):
            penalty_path(y, bad)


def test_warm_path_matches_cold_fits(rng):
    y = random_data(rng, 40, 5)
    grid = default_grid(y, 8)
    cfg = ConcordConfig(tol=1e-11, max_sweeps=5000)
    path = penalty_path(y, grid, cfg)
    for lam, fit in zip(grid, path.fits):
        cold = concord_fit(y, cfg.replace(lam=lam))
        assert np.max(np.abs(fit.omega - cold.omega)) < 1e-8
    assert path.nonzero_fraction[0] == 0
    assert np.all(np.diff(path.nonzero_fraction) >= 0)


def test_node_rss_and_bic_match_brute_force(rng):
    y = random_data(rng, 25, 4)
    om = concord_fit(y, lam=5.0).omega
    n, p = y.shape
    rss = []
    for i in range(p):
        pred = np.zeros(n)
        for j in range(p):
            if j != i:
                pred += (-om[i, j] / om[i, i]) * y[:, j]
        rss.append(float(np.sum((y[:, i] - pred) ** 2)))
    assert np.allclose(node_rss(om, y), rss, rtol=1e-12)
    entry = bic_score(om, y, 5.0)
    deg = [sum(1 for j in range(p) if j != i and om[i, j] != 0) for i in range(p)]
    expected = [n * math.log(r) + math.log(n) * d for r, d in zip(rss, deg)]
    assert np.allclose(entry.bic_per_node, expected, rtol=1e-12)
    assert entry.bic_total == pytest.approx(sum(expected))
    d = entry.to_dict()
    assert set(d) == {"lambda", "bic_total", "bic_per_node", "nz_fraction"}


def test_zero_rss():
    y = np.column_stack([np.ones(3), np.zeros(3)])
    with pytest.raises(ZeroRSS):
        bic_score(np.eye(2), y)


def test_bic_tie_prefers_larger_lambda(rng):
    y = random_data(rng, 20, 4)
    top = lambda_max(y)
    grid = np.array([3 * top, 2 * top, 0.2 * top])
    path = penalty_path(y, grid)
    lam, report = select_lambda_bic(path, y)
    # the two diagonal fits tie exactly
    assert report.entries[0].bic_total == report.entries[1].bic_total
    assert report.selected_index != 1
    parsed = json.loads(report.to_json())
    assert parsed["selected_lambda"] == lam and len(parsed["entries"]) == 3


def test_exact_tie_selects_first(rng):
    y = random_data(rng, 20, 4)
    fit = concord_fit(y, lam=0.3 * lambda_max(y))
    path = PathResult(np.array([2.0, 1.0]), [fit, fit], np.zeros(2))
    lam, report = select_lambda_bic(path, y)
    assert lam == 2.0 and report.selected_index == 0


def test_make_folds():
    parts = make_folds(11, 5)
    assert [len(p) for p in parts] == [3, 2, 2, 2, 2]
    assert np.array_equal(np.concatenate(parts), np.arange(11))
    rnd = make_folds(11, 5, "random", seed=1)
    assert np.array_equal(np.sort(np.concatenate(rnd)), np.arange(11))
    assert not all(np.array_equal(a, b) for a, b in zip(rnd, parts))
    with pytest.raises(ValueError):
        make_folds(11, 5, "random")
    with pytest.raises(FoldTooSmall):
        make_folds(3, 5)
    with pytest.raises(FoldTooSmall):
        make_folds(10, 1)


def test_cv_risk_matches_manual_folds(rng):
    y = random_data(rng, 30, 4)
    lam = 0.3 * lambda_max(y)
    total = 0.0
    for idx in np.array_split(np.arange(30), 5):
        train = np.delete(y, idx, axis=0)
        om = concord_fit(train, lam=lam).omega
        test = y[idx]
        for i in range(4):
            pred = sum(-om[i, j] / om[i, i] * test[:, j] for j in range(4) if j != i)
            total += float(np.sum((test[:, i] - pred) ** 2)) / len(idx)
    assert cv_predictive_risk(y, lam) == pytest.approx(total, rel=1e-10)


def test_cv_parallel_equals_serial(rng):
    y = random_data(rng, 30, 5)
    grid = default_grid(y, 6)
    assert np.array_equal(cv_risk_path(y, grid, jobs=1), cv_risk_path(y, grid, jobs=3))
    lam, risks = select_lambda_cv(y, grid)
    assert lam == grid[int(np.argmin(risks))]


def test_bic_estimator(rng):
    x = rng.normal(size=(60, 5)) * 3 + 1
    est = ConcordBIC(n_lambdas=10).fit(x)
    assert est.lam_ in est.lambdas_
    assert isinstance(est.path_, PathResult)
    assert est.bic_report_.selected_lambda == est.lam_
    assert clone(est).get_params()["n_lambdas"] == 10


def test_cv_estimator(rng):
    x = rng.normal(size=(60, 5))
    est = ConcordCV(n_lambdas=8, folds=4).fit(x)
    assert est.lambdas_.size == 8
    assert est.lam_ == est.lambdas_[int(np.argmin(est.cv_risk_))]
    ref = concord_fit((x - x.mean(0)) / x.std(0), lam=est.lam_).omega
    assert np.max(np.abs(est.precision_ - ref)) < 1e-6

import numpy as np
import pytest
from conftest import random_data, random_omega

from pyconcord.exceptions import NonPositiveDiagonal, NotPositiveDefinite
from pyconcord.linalg import sample_covariance
from pyconcord.pseudolik import (
    METHODS,
    MethodForm,
    gaussian_loglik,
    regression_loglik,
    splice_objective,
    symlasso_objective,
    unified_loglik,
)


def node_loop(omega, y, method):
    """Node-wise regression terms written out one variable at a time."""
    n, p = y.shape
    total = 0.0
    for i in range(p):
        w_ii = omega[i, i]
        others = [j for j in range(p) if j != i]
        pred = sum(-omega[i, j] / w_ii * y[:, j] for j in others)
        rss = float(np.sum((y[:, i] - pred) ** 2))
        if method == "concord":
            # ||w_ii Y_i + sum_j w_ij Y_j||^2 = w_ii^2 rss
            total += -n * np.log(w_ii) + 0.5 * w_ii**2 * rss
        elif method == "space1":
            total += -0.5 * n * np.log(w_ii) + 0.5 * rss
        else:
            # conditional variance 1 / w_ii
            total += 0.5 * n * np.log(1 / w_ii) + 0.5 * w_ii * rss
    return total


@pytest.mark.parametrize("method", METHODS)
def test_regression_form_matches_node_loop(rng, method):
    y = random_data(rng, 15, 4)
    om = random_omega(rng, 4)
    assert regression_loglik(om, y, method) == pytest.approx(node_loop(om, y, method), rel=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_unified_identity(rng, method):
    y = random_data(rng, 20, 5)
    om = random_omega(rng, 5)
    reg = regression_loglik(om, y, method)
    mat = unified_loglik(om, sample_covariance(y), method)
    assert mat == pytest.approx(reg, rel=1e-10)


def test_shared_forms_identical(rng):
    y = random_data(rng, 12, 4)
    om = random_omega(rng, 4)
    s = sample_covariance(y)
    vals = {m: unified_loglik(om, s, m) for m in ("space2", "symlasso", "splice")}
    assert vals["space2"] == vals["symlasso"] == vals["splice"]


def test_method_form_maps():
    om = np.array([[2.0, 0.5], [0.5, 4.0]])
    f = MethodForm("concord")
    assert np.allclose(f.g(om), np.diag([4.0, 16.0]))
    assert f.log_det_g(om) == pytest.approx(np.log(64.0))
    h1 = MethodForm("space1").h(om)
    d = np.diag([2.0, 4.0])
    assert np.allclose(h1, om @ np.linalg.inv(d @ d) @ om)
    with pytest.raises(ValueError):
        MethodForm("glasso")
    with pytest.raises(NonPositiveDiagonal):
        f.g(-np.eye(2))


def test_native_objectives_agree_with_omega_form(rng):
    y = random_data(rng, 18, 4)
    om = random_omega(rng, 4)
    d = np.diag(om)
    off = om - np.diag(d)
    lam = 0.7
    pen = lam * np.abs(np.triu(off, 1)).sum()
    assert symlasso_objective(1 / d, off, y, lam) == pytest.approx(regression_loglik(om, y, "symlasso") + pen)
    beta = -off / d[:, None]
    spen = lam * np.abs(np.triu(beta, 1)).sum()
    assert splice_objective(beta, 1 / np.sqrt(d), y, lam) == pytest.approx(
        regression_loglik(om, y, "splice") + spen
    )


def test_gaussian_loglik(rng):
    y = random_data(rng, 30, 3)
    s = sample_covariance(y)
    om = np.linalg.inv(s.s)
    expected = 0.5 * 30 * (-np.log(np.linalg.det(om)) + 3)
    assert gaussian_loglik(om, s) == pytest.approx(expected)
    with pytest.raises(NotPositiveDefinite):
        gaussian_loglik(np.diag([1.0, -1.0, 1.0]), s)

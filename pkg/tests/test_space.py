import numpy as np
import pytest
from conftest import random_data
from sklearn.base import clone

from pyconcord.exceptions import NonPositiveDiagonal
from pyconcord.io import fixture_path, read_matrix_csv
from pyconcord.space import (
    Space,
    SpaceState,
    _detect_cycle,
    space_fit,
    space_objective,
    space_reconstruct_omega,
    space_rho_step,
    space_state_from_omega,
    space_variance_step,
    space_variance_step_exact,
)


def rho_objective(rho, om, w, y, lam):
    d = np.sqrt(om)
    beta = rho * d[None, :] / d[:, None]
    e = y - y @ beta.T
    return 0.5 * float(np.sum(w * np.sum(e * e, axis=0))) + lam * np.abs(np.triu(rho, 1)).sum()


def rho_fista(om, w, y, lam, iters=20000):
    """Accelerated proximal gradient on the upper-triangular rho vector."""
    p = y.shape[1]
    iu = np.triu_indices(p, 1)
    d = np.sqrt(om)

    def unpack(v):
        r = np.zeros((p, p))
        r[iu] = v
        return r + r.T

    def grad(v):
        rho = unpack(v)
        beta = rho * d[None, :] / d[:, None]
        e = y - y @ beta.T
        ye = y.T @ e  # ye[j, i] = Y_j' e_i
        c = d[None, :] / d[:, None]  # c[i, j] = sqrt(om_j / om_i)
        gm = -(w[:, None] * c * ye.T)
        return (gm + gm.T)[iu]

    # the smooth part is quadratic, so its Hessian columns come from gradient differences
    m = iu[0].size
    g0 = grad(np.zeros(m))
    hess = np.column_stack([grad(np.eye(m)[k]) - g0 for k in range(m)])
    step = 1.0 / np.linalg.eigvalsh(0.5 * (hess + hess.T))[-1]
    x = np.zeros(iu[0].size)
    z, t = x.copy(), 1.0
    for _ in range(iters):
        u = z - step * grad(z)
        x_new = np.sign(u) * np.maximum(np.abs(u) - step * lam, 0)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = x_new + (t - 1) / t_new * (x_new - x)
        if np.max(np.abs(x_new - x)) < 1e-14:
            x = x_new
            break
        x, t = x_new, t_new
    return unpack(x)


@pytest.mark.parametrize("weights", ["uniform", "partial_variance"])
def test_rho_step_matches_proximal_gradient(rng, weights):
    y = random_data(rng, 30, 5)
    om = rng.uniform(0.8, 2.0, 5)
    state = SpaceState(np.zeros((5, 5)), om, weights)
    lam = 3.0
    rho = space_rho_step(state, y, lam, tol=1e-13, max_sweeps=10000)
    ref = rho_fista(om, state.w, y, lam)
    assert np.allclose(rho, rho.T)
    assert np.max(np.abs(rho - ref)) < 1e-6
    assert rho_objective(rho, om, state.w, y, lam) <= rho_objective(ref, om, state.w, y, lam) + 1e-9


def test_variance_step_formula(rng):
    y = random_data(rng, 20, 4)
    rho = np.zeros((4, 4))
    rho[0, 1] = rho[1, 0] = 0.3
    om = rng.uniform(0.5, 2, 4)
    out = space_variance_step(SpaceState(rho, om), y)
    res0 = y[:, 0] - 0.3 * np.sqrt(om[1] / om[0]) * y[:, 1]
    assert out[0] == pytest.approx(20 / (res0 @ res0))
    assert out[2] == pytest.approx(20 / (y[:, 2] @ y[:, 2]))


def test_exact_variance_step_is_stationary(rng):
    y = random_data(rng, 25, 4)
    rho = np.array([[0, 0.2, 0, -0.1], [0.2, 0, 0.3, 0], [0, 0.3, 0, 0], [-0.1, 0, 0, 0.0]])
    state = SpaceState(rho, np.ones(4), "partial_variance")
    om = space_variance_step_exact(state, y)
    # gradient of the partial-variance objective in log(omega) vanishes
    eps = 1e-6
    for i in range(4):
        up, dn = om.copy(), om.copy()
        up[i] *= np.exp(eps)
        dn[i] *= np.exp(-eps)
        f = lambda o: space_objective(SpaceState(rho, o, "partial_variance"), y, 0.0)
        assert (f(up) - f(dn)) / (2 * eps) == pytest.approx(0.0, abs=1e-5)


def test_exact_variance_iterations_descend(rng):
    y = random_data(rng, 30, 5)
    lam = 2.0
    res = space_fit(y, lam, "partial_variance", variance="exact", max_iters=40, tol=1e-10)
    # re-run step by step and track the objective
    state = SpaceState(np.zeros((5, 5)), 30 / np.einsum("ij,ij->j", y, y), "partial_variance")
    values = [space_objective(state, y, lam)]
    for _ in range(10):
        rho = space_rho_step(state, y, lam, tol=1e-12, max_sweeps=5000)
        state = SpaceState(rho, state.omega_diag, "partial_variance")
        values.append(space_objective(state, y, lam))
        state = SpaceState(rho, space_variance_step_exact(state, y), "partial_variance")
        values.append(space_objective(state, y, lam))
    assert np.all(np.diff(values) <= 1e-8 * np.abs(values[1:]))
    assert res.omega.shape == (5, 5)


def test_reconstruct_roundtrip(rng):
    om = np.array([[2.0, -0.5, 0.0], [-0.5, 1.0, 0.2], [0.0, 0.2, 3.0]])
    state = space_state_from_omega(om)
    assert np.allclose(space_reconstruct_omega(state), om)
    assert state.rho[0, 1] == pytest.approx(0.5 / np.sqrt(2.0))
    with pytest.raises(NonPositiveDiagonal):
        space_state_from_omega(-np.eye(2))
    with pytest.raises(ValueError):
        SpaceState(np.zeros((2, 2)), np.ones(2), "bogus")


def test_cycle_detector():
    a, b = np.array([[1.0]]), np.array([[2.0]])
    assert _detect_cycle([a, b, a, b, a, b], 1e-9, 4) == 2
    c = np.array([[3.0]])
    assert _detect_cycle([a, b, c, a, b, c, a], 1e-9, 4) == 3
    assert _detect_cycle([a, a, a, a, a, a], 1e-9, 4) is None
    assert _detect_cycle([a, b, c, a, b, a], 1e-9, 4) is None


def test_fixture_cycles_with_uniform_weights():
    y, names = read_matrix_csv(fixture_path())
    assert names == ["y1", "y2", "y3"] and y.shape == (4, 3)
    res = space_fit(y, 0.2, "uniform")
    assert not res.converged
    assert res.cycle is not None and res.cycle.period == 2
    printed = [
        np.array([[1.432570, 1.416740, -2.132500], [1.416740, 3552.598070, 0.0], [-2.132500, 0.0, 89.163310]]),
        np.array([[3552.565950, 1.416720, 0.0], [1.416720, 1.404240, 2.100770], [0.0, 2.100770, 123.137260]]),
    ]
    for target in printed:
        assert any(
            np.allclose(m, target, rtol=0.01, atol=0) and np.array_equal(m == 0, target == 0)
            for m in res.cycle.matrices
        )


def test_converges_on_benign_data(rng):
    y = random_data(rng, 200, 4)
    res = space_fit(y, 5.0, "partial_variance")
    assert res.converged and res.cycle is None
    assert len(res.change_trace) == res.sweeps_used


def test_estimator(rng):
    x = rng.normal(size=(50, 4))
    est = Space(lam=2.0, max_iters=3).fit(x)
    assert est.n_iter_ <= 3
    assert est.precision_.shape == (4, 4)
    assert clone(est).get_params()["max_iters"] == 3

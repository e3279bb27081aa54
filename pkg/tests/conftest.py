import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_data(rng, n, p):
    y = rng.standard_normal((n, p)) @ (np.eye(p) + 0.3 * rng.standard_normal((p, p)))
    y -= y.mean(axis=0)
    return y / y.std(axis=0)


def random_omega(rng, p, diag_low=0.5, diag_high=2.0, off=0.3):
    """Symmetric matrix with a positive diagonal (not necessarily definite)."""
    a = rng.uniform(-off, off, (p, p))
    a = np.triu(a, 1)
    a = a + a.T
    np.fill_diagonal(a, rng.uniform(diag_low, diag_high, p))
    return a


@pytest.fixture
def small_data(rng):
    return random_data(rng, 40, 6)

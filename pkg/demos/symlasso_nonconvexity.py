"""Show that the SYMLASSO objective is not convex along a single alpha coordinate.

In alpha_i alone the node term is ``n log a + ||Y_i||^2 / a + const + a ||z||^2``,
whose second derivative ``-n/a^2 + 2||Y_i||^2/a^3`` turns negative once
``a > 2 ||Y_i||^2 / n``.  A central second difference makes that visible.

Run with ``python demos/symlasso_nonconvexity.py``.
"""

import numpy as np

from pyconcord.linalg import standardize
from pyconcord.pseudolik import symlasso_objective


def second_difference(f, x, h):
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


def main():
    rng = np.random.default_rng(0)
    y = standardize(rng.standard_normal((50, 4)) @ (np.eye(4) + 0.4 * np.eye(4, k=1))).values
    p = y.shape[1]
    off = np.zeros((p, p))
    off[0, 1] = off[1, 0] = -0.3
    lam = 1.0

    def along_alpha0(a):
        alpha = np.ones(p)
        alpha[0] = a
        return symlasso_objective(alpha, off, y, lam)

    # with unit-variance columns the curvature flips sign at alpha = 2
    print(f"{'alpha_0':>8} {'second difference':>18}")
    for a in (0.5, 1.0, 1.5, 2.5, 4.0, 8.0):
        d2 = second_difference(along_alpha0, a, 1e-3)
        print(f"{a:8.2f} {d2:18.6f}")
    d2 = second_difference(along_alpha0, 4.0, 1e-3)
    assert d2 < 0, "expected negative curvature along alpha_0"
    print("negative second difference found: the objective is not convex")


if __name__ == "__main__":
    main()

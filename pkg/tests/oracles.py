"""Independent reference computations for the tests.

Nothing here calls the package integrator or differentiation code: the
RK4 stepper is a plain fixed-step loop and the right-hand sides of the
worked example systems are typed in by hand.
"""
import numpy as np


def rk4(rhs, X0, T, h=1e-4):
    """Classical RK4 on rows of ``X0`` (vectorised over rows)."""
    X = np.array(X0, dtype=float, copy=True)
    steps = int(round(T / h))
    h = T / steps
    for _ in range(steps):
        k1 = rhs(X)
        k2 = rhs(X + 0.5 * h * k1)
        k3 = rhs(X + 0.5 * h * k2)
        k4 = rhs(X + h * k3)
        X += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def x3_decay(t, x30=1.0):
    """Solution of x3' = -x3^3: x30 (1 + 2 x30^2 t)^(-1/2)."""
    return x30 / np.sqrt(1.0 + 2.0 * x30 ** 2 * np.asarray(t, dtype=float))


def example1_closed(X):
    """x1' = -x2 w, x2' = x1 w, x3' = -x3^3 with w = x2^2 + x3^2."""
    x1, x2, x3 = X.T
    w = x2 ** 2 + x3 ** 2
    return np.column_stack([-x2 * w, x1 * w, -x3 ** 3])


def polar_closed(X):
    """r' = -r(r-1), theta' = sin^2(theta/2) + x3, x3' = -x3^3."""
    r, th, x3 = X.T
    return np.column_stack([-r * (r - 1.0), np.sin(th / 2.0) ** 2 + x3, -x3 ** 3])


def _flat(x):
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        return np.where(x == 0.0, 0.0, np.exp(-1.0 / np.where(x == 0.0, 1.0, x) ** 2))


def five_closed(X):
    """Five-state system under u = -y, y = (x3, x4 exp(-1/x4^2))."""
    x1, x2, x3, x4, x5 = X.T
    e = _flat(x4)
    return np.column_stack([-x1 - x1 * x4, -x2 + x1 - x4 ** 2, x5 ** 2 - x3,
                            x1 ** 2 - e * x4 * e, -x3 * x5])


def five_V(X):
    X = np.atleast_2d(X)
    return 0.5 * (X[:, 0] ** 2 + X[:, 2] ** 2 + X[:, 3] ** 2 + X[:, 4] ** 2)


def numerical_gradient(fn, x, h=1e-6):
    """Central differences of a scalar function of a 1-D array."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g

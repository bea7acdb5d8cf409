"""Gradients, Jacobians, Lie derivatives, Lie brackets and the residuals
whose zero sets define S and S'.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import (ConfigurationError, ControlAffineSystem, InputError,
                    NumericalDomainError, PassiveSystem, SmoothField, SmoothScalar)
from .dual import jvp
from .taylor import Taylor

JET_CAP = 12
NESTING_CAP = 4
FD_STEP = 1e-5
RESIDUAL_BAND = 1e-6


def _fn(obj):
    return obj.fn if isinstance(obj, (SmoothField, SmoothScalar)) else obj


def _point(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (n is not None and x.size != n):
        raise InputError(f"expected a point in R^{n}, got shape {x.shape}")
    return [float(v) for v in x]


def _finite(a, what):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NumericalDomainError(f"non-finite {what}")
    return a


def gradient(q, x):
    """Exact forward-mode gradient of a scalar map."""
    fn = _fn(q)
    xs = _point(x, getattr(q, "n", None))
    n = len(xs)
    out = np.empty(n)
    for i in range(n):
        e = [0.0] * n
        e[i] = 1.0
        out[i] = jvp(fn, xs, e)[1]
    return _finite(out, "gradient")


def jacobian(F, x):
    fn = _fn(F)
    xs = _point(x, getattr(F, "n", None))
    n = len(xs)
    J = np.empty((n, n))
    for i in range(n):
        e = [0.0] * n
        e[i] = 1.0
        J[:, i] = [float(v) for v in jvp(fn, xs, e)[1]]
    return _finite(J, "jacobian")


# --------------------------------------------------------------------------
# generic (nestable) operators on callables
# --------------------------------------------------------------------------

def lie_fn(f, q):
    """The callable x -> L_f q(x); nestable and generic like its inputs."""
    f, q = _fn(f), _fn(q)

    def Lq(x):
        return jvp(q, x, f(x))[1]
    return Lq


def bracket_fn(f, g):
    """The callable x -> [f, g](x) = Dg(x) f(x) - Df(x) g(x)."""
    f, g = _fn(f), _fn(g)

    def br(x):
        gx, dg_f = jvp(g, x, f(x))
        _, df_g = jvp(f, x, gx)
        return [a - b for a, b in zip(dg_f, df_g)]
    return br


def _fd_bracket_fn(f, g, n, step):
    f, g = _fn(f), _fn(g)

    def dir_diff(F, x, v):
        xp = [a + step * b for a, b in zip(x, v)]
        xm = [a - step * b for a, b in zip(x, v)]
        return [(p - m) / (2 * step) for p, m in zip(F(xp), F(xm))]

    def br(x):
        gx = list(g(x))
        fx = list(f(x))
        return [a - b for a, b in zip(dir_diff(g, x, fx), dir_diff(f, x, gx))]
    return br


def ad_fn(f, g, k, max_depth=NESTING_CAP, fallback=False, n=None):
    """Callable for ad_f^k g. Levels past ``max_depth`` need ``fallback``
    (central differences, step 1e-5) or raise :class:`ConfigurationError`.
    """
    if k < 0:
        raise InputError("bracket order must be nonnegative")
    if k > max_depth and not fallback:
        raise ConfigurationError(f"ad^{k} exceeds the nesting cap {max_depth}")
    fn = _fn(g)
    for level in range(1, k + 1):
        if level <= max_depth:
            fn = bracket_fn(f, fn)
        else:
            fn = _fd_bracket_fn(f, fn, n, FD_STEP)
    return fn


# --------------------------------------------------------------------------
# point evaluations
# --------------------------------------------------------------------------

def lie_scalar(f, q, x):
    """L_f q(x) = dq(x) . f(x)."""
    xs = _point(x)
    return float(_finite(lie_fn(f, q)(xs), "Lie derivative"))


def _columns(X, n=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if n is not None and X.shape[1] != n:
        raise InputError(f"points in R^{X.shape[1]}, expected R^{n}")
    return X, [X[:, i] for i in range(X.shape[1])]


def lie_batch(f, q, X):
    """L_f q at every row of ``X`` (first-order forward mode on arrays)."""
    X, cols = _columns(X, getattr(q, "n", None))
    fv = [np.broadcast_to(np.asarray(c, dtype=float), (len(X),))
          for c in _fn(f)(cols)]
    val = jvp(_fn(q), cols, fv)[1]
    return _finite(np.broadcast_to(np.asarray(val, dtype=float), (len(X),)).copy(),
                   "Lie derivative")


def gradient_batch(q, X):
    """Rows of forward-mode gradients of ``q`` at the rows of ``X``."""
    X, cols = _columns(X, getattr(q, "n", None))
    G = np.empty_like(X)
    for i in range(X.shape[1]):
        e = [np.zeros(len(X)) for _ in range(X.shape[1])]
        e[i] = np.ones(len(X))
        G[:, i] = np.broadcast_to(np.asarray(jvp(_fn(q), cols, e)[1], dtype=float),
                                  (len(X),))
    return _finite(G, "gradient")


def lie_bracket(f, g, x):
    xs = _point(x)
    return _finite([float(v) for v in bracket_fn(f, g)(xs)], "Lie bracket")


def ad_iterate(f, g, k, x, max_depth=NESTING_CAP, fallback=False):
    xs = _point(x)
    fn = ad_fn(f, g, k, max_depth=max_depth, fallback=fallback, n=len(xs))
    return _finite([float(v) for v in fn(xs)], f"ad^{k}")


@dataclass
class Jet:
    """Taylor coefficients of t -> q(flow_f(t, x)) at t = 0."""

    base: np.ndarray
    order: int
    coeffs: np.ndarray

    def lie(self, k):
        """k! c_k = L_f^k q(x)."""
        return float(math.factorial(k) * self.coeffs[..., k]) if self.coeffs.ndim == 1 \
            else math.factorial(k) * self.coeffs[..., k]


def flow_jet(f, x, K, cap=JET_CAP):
    """Taylor coefficients of the flow of ``f`` through ``x`` up to order K.

    Returns a list of :class:`Taylor`, one per state component.
    """
    if K > cap:
        raise ConfigurationError(f"jet order {K} exceeds the cap {cap}")
    fn = _fn(f)
    xs = _point(x)
    n = len(xs)
    X = [Taylor.constant(v, K) for v in xs]
    for k in range(K):
        F = fn(X)
        for i in range(n):
            fi = F[i]
            ck = fi.c[k] if isinstance(fi, Taylor) else (float(fi) if k == 0 else 0.0)
            X[i].c[k + 1] = ck / (k + 1)
    return X


def jet(q, f, x, K, cap=JET_CAP):
    X = flow_jet(f, x, K, cap=cap)
    val = _fn(q)(X)
    if isinstance(val, Taylor):
        c = val.c.copy()
    else:
        c = np.zeros(K + 1)
        c[0] = float(val)
    return Jet(np.asarray(x, dtype=float), K, _finite(c, "jet"))


def iterated_lie_scalar(f, q, m, x, cap=JET_CAP):
    """L_f^m q(x) from the m-th Taylor coefficient along the flow."""
    if m < 0:
        raise InputError("order must be nonnegative")
    return jet(q, f, x, m, cap=cap).lie(m)


def s_prime_residual(sys: ControlAffineSystem, r, x, cap=JET_CAP):
    """All L_f^m h_i(x), 0 <= m <= r+n-2, ordered output-major."""
    if r < 1:
        raise InputError("r must be >= 1")
    K = r + sys.n - 2
    X = flow_jet(sys.f, x, K, cap=cap)
    out = []
    for h in sys.h:
        val = h.fn(X)
        c = val.c if isinstance(val, Taylor) else np.r_[float(val), np.zeros(K)]
        out.extend(math.factorial(m) * c[m] for m in range(K + 1))
    return _finite(out, "S' residual")


def s_residual(ps: PassiveSystem, x, max_depth=NESTING_CAP, fallback=True):
    """L_f^j L_tau V(x) for tau = ad_f^k g_i (0<=k<=n-1), 0 <= j < r.

    Ordered input-major, then bracket order, then j. Brackets deeper than
    ``max_depth`` use finite differences when ``fallback`` is set; the
    caller can tell from :func:`s_residual_is_approximate`.
    """
    sys = ps.sys
    xs = _point(x, sys.n)
    V = ps.V.fn
    f = sys.f.fn
    out = []
    for g in sys.g:
        for k in range(sys.n):
            tau = ad_fn(f, g, k, max_depth=max_depth, fallback=fallback, n=sys.n)

            def LtauV(z, tau=tau):
                return jvp(V, z, tau(z))[1]

            q = LtauV
            for j in range(ps.r):
                out.append(float(q(xs)))
                q = lie_fn(f, q)
    return _finite(out, "S residual")


def s_residual_is_approximate(ps, max_depth=NESTING_CAP):
    return ps.sys.n - 1 > max_depth


def in_s_prime(sys, r, x, band=RESIDUAL_BAND):
    return float(np.max(np.abs(s_prime_residual(sys, r, x)))) <= band


def in_s(ps, x, band=RESIDUAL_BAND):
    return float(np.max(np.abs(s_residual(ps, x)))) <= band

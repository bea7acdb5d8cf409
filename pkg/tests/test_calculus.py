import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from setstab import scenarios
from setstab.calculus import (Dual, ad_iterate, gradient, in_s_prime, iterated_lie_scalar,
                              jacobian, jvp, lie_batch, lie_bracket, lie_fn, lie_scalar,
                              s_prime_residual, s_residual)
from setstab.core import SmoothField, SmoothScalar
from setstab import smath

from oracles import numerical_gradient

pt3 = st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3).map(np.array)


def q(x):
    return x[0] ** 2 * x[1] + smath.sin(x[2]) * x[0] + smath.exp(0.3 * x[1])


def q_np(x):
    return x[0] ** 2 * x[1] + np.sin(x[2]) * x[0] + np.exp(0.3 * x[1])


def f(x):
    return [x[1] * x[2], -x[0] + x[2] ** 2, smath.cos(x[0]) - x[2]]


def g(x):
    return [x[2], x[0] * x[1], 1.0 + 0.0 * x[0]]


def f_np(x):
    return np.array([x[1] * x[2], -x[0] + x[2] ** 2, np.cos(x[0]) - x[2]])


def g_np(x):
    return np.array([x[2], x[0] * x[1], 1.0])


def _num_jac(F, x, h=1e-6):
    return np.column_stack([(F(x + h * e) - F(x - h * e)) / (2 * h) for e in np.eye(x.size)])


@given(pt3)
def test_gradient_matches_central_differences(x):
    assert np.allclose(gradient(q, x), numerical_gradient(q_np, x), atol=1e-6)


@given(pt3)
def test_lie_derivative_is_gradient_dot_field(x):
    expect = numerical_gradient(q_np, x) @ f_np(x)
    assert lie_scalar(f, q, x) == pytest.approx(expect, abs=1e-5)


@given(pt3)
def test_bracket_matches_jacobian_formula(x):
    expect = _num_jac(g_np, x) @ f_np(x) - _num_jac(f_np, x) @ g_np(x)
    assert np.allclose(lie_bracket(f, g, x), expect, atol=1e-5)


@given(pt3)
def test_bracket_antisymmetric_and_jacobi(x):
    assert np.allclose(lie_bracket(f, g, x), -lie_bracket(g, f, x), atol=1e-12)

    def h(z):
        return [z[0] * z[2], smath.sin(z[1]), z[0] - z[1]]

    from setstab.calculus import bracket_fn
    a = bracket_fn(f, bracket_fn(g, h))
    b = bracket_fn(g, bracket_fn(h, f))
    c = bracket_fn(h, bracket_fn(f, g))
    xs = [float(v) for v in x]
    total = np.array(a(xs), dtype=float) + np.array(b(xs), dtype=float) \
        + np.array(c(xs), dtype=float)
    assert np.allclose(total, 0.0, atol=1e-9)


@given(pt3, st.integers(0, 4))
def test_jet_lie_derivatives_match_nested_duals(x, m):
    nested = q
    for _ in range(m):
        nested = lie_fn(f, nested)
    assert iterated_lie_scalar(f, q, m, x) == pytest.approx(float(nested(list(x))),
                                                            rel=1e-9, abs=1e-9)


def test_ad_zero_is_g_and_one_is_bracket():
    x = np.array([0.3, -0.2, 0.7])
    assert np.allclose(ad_iterate(f, g, 0, x), g_np(x))
    assert np.allclose(ad_iterate(f, g, 1, x), lie_bracket(f, g, x))


def test_jvp_and_jacobian():
    x = [0.5, 1.0, -1.0]
    val, tan = jvp(f, x, [1.0, 0.0, 0.0])
    assert np.allclose(np.array(tan, dtype=float), _num_jac(f_np, np.array(x))[:, 0], atol=1e-6)
    assert np.allclose(jacobian(f, x), _num_jac(f_np, np.array(x)), atol=1e-6)
    d = Dual(1, 2.0, 1.0) * Dual(1, 3.0, 2.0)
    assert (d.p, d.t) == (6.0, 7.0)


def test_lie_batch_agrees_with_pointwise(rng):
    X = rng.uniform(-1, 1, size=(20, 3))
    fld, qq = SmoothField(f, 3), SmoothScalar(q, 3)
    assert np.allclose(lie_batch(fld, qq, X), [lie_scalar(f, q, x) for x in X], atol=1e-12)


def test_flat_function_derivatives_vanish_at_zero():
    x = [0.0]
    assert gradient(SmoothScalar(lambda z: smath.flat_exp(z[0]), 1), x)[0] == 0.0
    assert smath.flat_exp(0.0) == 0.0
    assert smath.flat_exp(0.5) == pytest.approx(np.exp(-4.0))


def test_five_state_s_prime_residual(rng):
    """{x3=x4=x5=0} is S'; generic points are far from it."""
    sc = scenarios.load("five-state")
    sys, r = sc.ps.sys, sc.ps.r
    P = rng.uniform(-1, 1, size=(200, 5))
    P[:, 2:] = 0.0
    on = [np.max(np.abs(s_prime_residual(sys, r, x))) for x in P]
    assert max(on) < 1e-9
    G = rng.uniform(-1, 1, size=(200, 5))
    off = [np.max(np.abs(s_prime_residual(sys, r, x))) for x in G]
    assert min(off) > 1e-3
    assert in_s_prime(sys, r, P[0])


def test_s_residual_vanishes_on_O_of_example1():
    sc = scenarios.load("example1")
    x = np.array([0.4, -0.3, 0.0])
    assert np.max(np.abs(s_residual(sc.ps, x))) <= 1e-12
    assert np.max(np.abs(s_residual(sc.ps, np.array([0.4, -0.3, 0.5])))) > 1e-3

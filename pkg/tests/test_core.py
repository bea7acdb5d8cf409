import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from setstab.core import (ClosedSetSpec, ControlAffineSystem, InputError, PassiveSystem,
                          SmoothField, SmoothScalar, Verdict, close_loop, combine,
                          coordinate_subspace, euclidean, output_feedback, point_set,
                          polar_space, whole_space, zero_feedback)

coords = st.floats(-5, 5, allow_nan=False)


def _rotation():
    sys = ControlAffineSystem(SmoothField(lambda x: [x[1], -x[0], 0.0 * x[2]], 3),
                              (SmoothField(lambda x: [0.0 * x[0], 0.0 * x[0], 1.0 + 0.0 * x[0]], 3),),
                              (SmoothScalar(lambda x: x[2], 3),))
    return PassiveSystem(sys, SmoothScalar(lambda x: 0.5 * (x[0] ** 2 + x[1] ** 2 + x[2] ** 2), 3))


def test_polar_metric_wraps_angle():
    sp = polar_space()
    a = np.array([1.0, math.pi - 1e-3, 0.0])
    b = np.array([1.0, -math.pi + 1e-3, 0.0])
    assert sp.metric(a, b) == pytest.approx(2e-3, rel=1e-6)
    assert not sp.contains(np.array([-0.5, 0.0, 0.0]))


@given(st.lists(coords, min_size=3, max_size=3))
def test_point_set_distance_is_euclidean(x):
    S = point_set(np.array([1.0, -2.0, 0.5]))
    assert S.dist(np.array(x)) == pytest.approx(np.linalg.norm(np.array(x) - [1, -2, 0.5]))


@given(st.lists(coords, min_size=4, max_size=4))
def test_subspace_projection_lands_on_set(x):
    S = coordinate_subspace((1, 3), 4, [(-5, 5)] * 4)
    p = S.project(np.array(x))
    assert S.dist(p) == 0.0
    # the projection is the nearest point
    assert S.dist(np.array(x)) == pytest.approx(np.linalg.norm(np.array(x) - p))


def test_subspace_boundedness_flag():
    assert coordinate_subspace((0, 1), 2, [(-1, 1)] * 2).bounded
    assert not coordinate_subspace((0,), 2, [(-1, 1)] * 2).bounded


def test_samples_lie_on_and_near_sets(rng):
    S = coordinate_subspace((2,), 3, [(-1, 1)] * 3)
    assert np.all(S.dist(S.sample_on(rng, 50)) <= 1e-12)
    near = S.sample_near(rng, 0.1, 50)
    assert np.all(S.dist(near) <= 0.1 + 1e-12)
    W = whole_space(2, [(-1, 1)] * 2)
    assert np.all(W.dist(rng.normal(size=(10, 2))) == 0)


def test_failing_verdict_needs_witness():
    with pytest.raises(InputError):
        Verdict("stable", "fails")
    with pytest.raises(InputError):
        Verdict("stable", "maybe")


def test_combine_reports_first_failure():
    w = {"x0": np.zeros(2), "time": 1.0, "distance": 2.0}
    v = combine("both", [Verdict("a", "holds"), Verdict("b", "fails", witness=w),
                         Verdict("c", "inconclusive")])
    assert v.fails and v.witness is w
    assert combine("x", [Verdict("a", "holds"), Verdict("c", "inconclusive")]).outcome \
        == "inconclusive"
    d = v.to_dict()
    assert d["witness"]["x0"] == [0.0, 0.0]


@given(st.lists(coords, min_size=3, max_size=3), st.floats(0.1, 3))
def test_closed_loop_is_f_minus_g_phi(x, k):
    ps = _rotation()
    fb = output_feedback(ps.sys, k)
    fld = close_loop(ps, fb)
    x = np.array(x)
    expect = np.array([x[1], -x[0], -k * x[2]])
    assert np.allclose(fld(x), expect, atol=1e-12)
    assert np.allclose(close_loop(ps, zero_feedback(1))(x), [x[1], -x[0], 0.0])


def test_field_shape_checked():
    f = SmoothField(lambda x: [x[0]], 2)
    with pytest.raises(InputError):
        f(np.zeros(2))
    with pytest.raises(InputError):
        SmoothField(lambda x: [x[0], x[1]], 2)(np.zeros(3))


def test_custom_set_spec_contains():
    S = ClosedSetSpec("unit ball", 2, lambda X: np.maximum(np.linalg.norm(X, axis=-1) - 1, 0),
                      lambda rng, k: np.zeros((k, 2)), space=euclidean(2))
    assert S.contains(np.array([0.5, 0.5]))
    assert not S.contains(np.array([2.0, 0.0]))

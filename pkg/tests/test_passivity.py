import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from setstab import scenarios
from setstab.core import (ControlAffineSystem, FeedbackLaw, InputError, PassiveSystem,
                          SmoothField, SmoothScalar, Trajectory, output_feedback)
from setstab.integrate import IntegratorConfig, integrate_closed_loop
from setstab.passivity import (check_feedback_admissible, check_passivity,
                               check_storage_monotone, passivity_residuals)

PASSIVE = [n for n in scenarios.names() if scenarios.load(n).ps is not None]


@pytest.mark.parametrize("name", PASSIVE)
def test_scenarios_are_passive(name, rng):
    sc = scenarios.load(name)
    v = check_passivity(sc.ps, 2000, rng=rng, box=sc.box)
    assert v.outcome == "holds", v.to_dict()


@pytest.mark.parametrize("name", PASSIVE)
def test_scenario_feedback_admissible(name, rng):
    sc = scenarios.load(name)
    B = sc.box_array
    X = rng.uniform(B[:, 0], B[:, 1], size=(500, sc.n))
    if sc.O is not None:
        X = np.vstack([X, sc.O.sample_on(rng, 100)])
    assert check_feedback_admissible(sc.ps.sys, sc.feedback, X).outcome == "holds"


def _damped(sign=1.0):
    """x1' = x2, x2' = -x1 + sign*x2 + u, y = x2, V = |x|^2/2."""
    f = SmoothField(lambda x: [x[1], -x[0] + sign * x[1]], 2, name="f")
    g = SmoothField(lambda x: [0.0 * x[0], 1.0 + 0.0 * x[0]], 2, name="g")
    h = SmoothScalar(lambda x: x[1], 2, name="x2")
    V = SmoothScalar(lambda x: 0.5 * (x[0] ** 2 + x[1] ** 2), 2, name="V")
    return PassiveSystem(ControlAffineSystem(f, (g,), (h,)), V)


def test_anti_damped_system_fails_with_witness(rng):
    v = check_passivity(_damped(+1.0), 500, rng=rng, box=((-1, 1), (-1, 1)))
    assert v.outcome == "fails"
    assert v.witness["violation"] == "LfV"
    x = v.witness["x0"]
    assert x[1] ** 2 == pytest.approx(v.witness["distance"])


def test_wrong_output_fails(rng):
    ps = _damped(-1.0)
    bad = ControlAffineSystem(ps.sys.f, ps.sys.g, (SmoothScalar(lambda x: 2 * x[1], 2),))
    v = check_passivity(PassiveSystem(bad, ps.V), 200, rng=rng, box=((-1, 1), (-1, 1)))
    assert v.outcome == "fails" and v.witness["violation"] == "LgV_minus_h"


def test_sample_count_needs_box():
    with pytest.raises(InputError):
        check_passivity(_damped(-1.0), 10)


@given(st.floats(0.1, 10.0))
def test_positive_output_gain_is_admissible(gain):
    sys = _damped(-1.0).sys
    X = np.random.default_rng(0).uniform(-1, 1, size=(200, 2))
    X[:20, 1] = 0.0
    assert check_feedback_admissible(sys, output_feedback(sys, gain), X).outcome == "holds"


def test_wrong_sign_feedback_fails():
    sys = _damped(-1.0).sys
    X = np.random.default_rng(0).uniform(-1, 1, size=(200, 2))
    v = check_feedback_admissible(sys, output_feedback(sys, -1.0), X)
    assert v.outcome == "fails" and v.witness["violation"] == "h^T phi not positive"


def test_feedback_nonzero_where_output_vanishes():
    sys = _damped(-1.0).sys
    fb = FeedbackLaw(lambda x: [x[1] + 0.1 * x[0] ** 2], 1, name="leaky")
    X = np.array([[1.0, 0.0], [0.5, 0.5]])
    v = check_feedback_admissible(sys, fb, X)
    assert v.outcome == "fails" and v.witness["violation"] == "phi nonzero where h = 0"


def test_residuals_shape():
    sc = scenarios.load("example-polar")
    X = np.array([[1.0, 0.2, 0.3], [2.0, -1.0, -0.5]])
    LfV, gap, V = passivity_residuals(sc.ps, X)
    assert LfV.shape == gap.shape == V.shape == (2,)
    assert np.allclose(V, X[:, 2] ** 4 / 4)


@pytest.mark.parametrize("name", ["example1", "example-polar", "five-state"])
def test_closed_loop_storage_nonincreasing(name, rng):
    sc = scenarios.load(name)
    B = sc.box_array
    for x0 in rng.uniform(B[:, 0], B[:, 1], size=(5, sc.n)):
        tr = integrate_closed_loop(sc.ps, sc.feedback, x0, IntegratorConfig(T=20.0))
        assert check_storage_monotone(tr).outcome == "holds"


def test_storage_increase_is_caught():
    tr = Trajectory(np.arange(3.0), np.zeros((3, 1)), storage=np.array([1.0, 0.5, 0.6]))
    v = check_storage_monotone(tr)
    assert v.outcome == "fails" and v.witness["time"] == 2.0
    with pytest.raises(InputError):
        check_storage_monotone(Trajectory(np.arange(2.0), np.zeros((2, 1))))

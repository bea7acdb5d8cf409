import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from setstab.integrate import BACKEND
from setstab import scenarios
from setstab.core import InputError, NumericalDomainError, SmoothField, linear_field
from setstab.integrate import (IntegratorConfig, boundedness_probe, continue_trajectory,
                               integrate, integrate_closed_loop, integrate_until)

from oracles import example1_closed, rk4, x3_decay

needs_compiled = pytest.mark.skipif(BACKEND != "compiled", reason="compiled kernel not built")


@pytest.mark.parametrize("t", [1.0, 2.0, 4.0])
def test_cubic_decay_matches_closed_form(t):
    sc = scenarios.load("example1")
    tr = integrate(sc.closed_loop(), [0.0, 0.0, 1.0], IntegratorConfig(T=t))
    assert tr.times[-1] == pytest.approx(t, abs=1e-12)
    assert abs(tr.final[2] - x3_decay(t)) < 1e-7


def test_example1_matches_rk4():
    sc = scenarios.load("example1")
    x0 = np.array([1.0, 0.0, 0.5])
    tr = integrate(sc.closed_loop(), x0, IntegratorConfig(T=2.0))
    ref = rk4(example1_closed, x0[None, :], 2.0)[0]
    assert np.max(np.abs(tr.final - ref)) < 1e-6


@needs_compiled
@given(st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_backends_agree(x0):
    fld = scenarios.load("example1").closed_loop()
    cfg = IntegratorConfig(T=3.0)
    a = integrate(fld, x0, cfg, backend="compiled")
    b = integrate(fld, x0, cfg, backend="python")
    assert a.backend == "compiled" and b.backend == "python"
    assert np.allclose(a.final, b.final, atol=1e-10)
    assert len(a.times) == len(b.times)


def test_linear_decay_and_stride():
    fld = linear_field(-np.eye(2))
    tr = integrate(fld, [1.0, 2.0], IntegratorConfig(T=5.0, stride=3))
    assert np.allclose(tr.final, np.exp(-5.0) * np.array([1.0, 2.0]), rtol=1e-8)
    full = integrate(fld, [1.0, 2.0], IntegratorConfig(T=5.0))
    assert len(tr.times) < len(full.times)
    assert tr.times[-1] == pytest.approx(5.0)


def test_record_from_drops_early_samples():
    fld = linear_field(-np.eye(1))
    tr = integrate(fld, [1.0], IntegratorConfig(T=10.0, record_from=5.0))
    assert tr.times[0] == 0.0 and np.all(tr.times[1:] >= 5.0)


def test_escape_is_reported():
    blow = SmoothField(lambda x: [x[0] * x[0]], 1, name="x^2")
    tr = integrate(blow, [1.0], IntegratorConfig(T=2.0, r_max=1e3))
    assert tr.status in ("escaped", "collapsed")
    assert tr.terminated_early and tr.times[-1] < 1.0 + 1e-6


def test_nan_raises_or_flags():
    fld = SmoothField(lambda x: [x[0] * 0.0 + float("nan")], 1, name="nan")
    with pytest.raises(NumericalDomainError):
        integrate(fld, [0.5], IntegratorConfig(T=1.0), backend="python")
    tr = integrate(fld, [0.5], IntegratorConfig(T=1.0), backend="python", on_nan="flag")
    assert tr.status == "nan"


@pytest.mark.parametrize("kw", [dict(rtol=0.0), dict(atol=-1.0), dict(T=0.0),
                                dict(max_step=0.0), dict(stride=0)])
def test_invalid_config(kw):
    with pytest.raises(InputError):
        IntegratorConfig(**kw)


def test_bad_initial_state():
    fld = linear_field(-np.eye(2))
    with pytest.raises(InputError):
        integrate(fld, [1.0], IntegratorConfig(T=1.0))
    with pytest.raises(InputError):
        integrate(fld, [np.inf, 0.0], IntegratorConfig(T=1.0))


def test_continue_equals_single_run():
    fld = scenarios.load("example1").closed_loop()
    cfg = IntegratorConfig(T=2.0)
    one = integrate(fld, [0.3, 0.4, 0.8], cfg.replace(T=4.0))
    two = continue_trajectory(fld, integrate(fld, [0.3, 0.4, 0.8], cfg), 2.0, cfg)
    assert two.times[-1] == pytest.approx(4.0)
    assert np.allclose(one.final, two.final, atol=1e-8)
    assert np.all(np.diff(two.times) > 0)


def test_integrate_until_doubles_horizon():
    fld = linear_field(-np.eye(1))
    tr = integrate_until(fld, [1.0], IntegratorConfig(T=1.0),
                         need_more=lambda t: t.final[0] > 1e-3, cap_factor=64)
    assert tr.times[-1] == pytest.approx(8.0)


def test_closed_loop_signals():
    sc = scenarios.load("example1")
    tr = integrate_closed_loop(sc.ps, sc.feedback, [1.0, 0.0, 0.5], IntegratorConfig(T=1.0))
    assert tr.storage.shape == tr.times.shape
    assert np.allclose(tr.storage, tr.states[:, 2] ** 4 / 4)
    assert np.allclose(tr.inputs[:, 0], -tr.states[:, 2] ** 3)


def test_boundedness_probe():
    stable = linear_field(-np.eye(2))
    res = boundedness_probe(stable, [0.5, 0.5], IntegratorConfig(T=5.0), samples=4, levels=2)
    assert res.ok and res.lam == 1.0
    blow = SmoothField(lambda x: [x[0] * x[0]], 1, name="x^2")
    res = boundedness_probe(blow, [1.0], IntegratorConfig(T=5.0, r_max=1e3), samples=4,
                            levels=2)
    assert not res.ok and res.witness is not None


def test_csv_export(tmp_path):
    tr = integrate(linear_field(-np.eye(2)), [1.0, 0.0], IntegratorConfig(T=1.0))
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (len(tr.times), 3)
    assert path.read_text().splitlines()[0] == "t,x1,x2"

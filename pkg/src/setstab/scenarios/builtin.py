"""Built-in scenarios.

The three worked systems (``example1``, ``example-polar``,
``five-state``) come with the sets used in their analysis. The
remaining ones are small constructions that exercise the checkers on
known answers; the ones marked ``invented`` are not taken from any
reference and are labelled as such in their description.
"""
from __future__ import annotations

import math

import numpy as np

from .. import smath
from ..core import (ClosedSetSpec, ControlAffineSystem, PassiveSystem, SmoothField,
                    SmoothScalar, coordinate_subspace, euclidean, output_feedback,
                    point_set, polar_space)
from .base import Scenario, register

# named callables usable from JSON scenario files as "builtin:<name>"
FUNCTIONS = {}


def _named(name):
    def deco(fn):
        FUNCTIONS[name] = fn
        return fn
    return deco


def _e(n, i):
    """Constant unit field e_i on R^n."""
    def fn(x):
        return [1.0 if k == i else 0.0 for k in range(n)]
    return fn


# --------------------------------------------------------------------------
# example1: rotation on concentric circles, attracted to {x3 = 0}
# --------------------------------------------------------------------------

@_named("example1.f")
def example1_f(x):
    w = x[1] * x[1] + x[2] * x[2]
    return [-x[1] * w, x[0] * w, 0.0 * x[2]]


@_named("example1.h")
def example1_h(x):
    return x[2] ** 3


@_named("example1.V")
def example1_V(x):
    return x[2] ** 4 / 4.0


def example1():
    box = ((-2, 2), (-2, 2), (-2, 2))
    sys = ControlAffineSystem(SmoothField(example1_f, 3, name="example1.f"),
                              (SmoothField(_e(3, 2), 3, name="e3"),),
                              (SmoothScalar(example1_h, 3, name="x3^3"),), name="example1")
    ps = PassiveSystem(sys, SmoothScalar(example1_V, 3, name="x3^4/4"))
    O = coordinate_subspace((2,), 3, box, name="{x3=0}")
    return Scenario(
        name="example1",
        description="Rotation x1' = -x2(x2^2+x3^2), x2' = x1(x2^2+x3^2) with x3' = -x3^3; "
                    "Gamma = {x2=x3=0} is a global but unstable attractor relative to "
                    "O = {x3=0}, and is not attractive. The input channel g = e3, "
                    "output h = x3^3 and storage x3^4/4 are invented so that the closed "
                    "loop under u = -y is exactly this system.",
        box=box, ps=ps, feedback=output_feedback(sys),
        Gamma=coordinate_subspace((1, 2), 3, box, name="{x2=x3=0}"),
        O=O, V0=O, S_prime=O, x0=(1.0, 0.0, 0.5),
        settings={"reduction_theorem": "attractivity", "global": True, "horizon": 200.0,
                  "samples": 16},
        tags=("worked-example", "limit-residuals", "uniform-attraction"), invented=False,
        expected={"passivity": "holds", "feedback_admissible": "holds",
                  "reduction.conclusion": "fails", "reduction.i'": "fails",
                  "reduction.ii'": "holds", "reduction.iii'": "holds",
                  "reduction.consistent": True, "lemma4": "holds"})


# --------------------------------------------------------------------------
# example-polar: unit-circle attractor with an unstable equilibrium on it
# --------------------------------------------------------------------------

@_named("polar.f")
def polar_f(x):
    s = smath.sin(x[1] / 2.0)
    return [-x[0] * (x[0] - 1.0), s * s + x[2], 0.0 * x[2]]


def example_polar():
    space = polar_space()
    box = ((0.25, 2.0), (-math.pi, math.pi), (-1.0, 1.0))
    sys = ControlAffineSystem(SmoothField(polar_f, 3, name="polar.f", space=space),
                              (SmoothField(_e(3, 2), 3, name="e3", space=space),),
                              (SmoothScalar(example1_h, 3, name="x3^3"),), space=space,
                              name="example-polar")
    ps = PassiveSystem(sys, SmoothScalar(example1_V, 3, name="x3^4/4"))
    O = coordinate_subspace((2,), 3, box, name="{x3=0}", space=space)
    return Scenario(
        name="example-polar",
        description="r' = -r(r-1), theta' = sin^2(theta/2) + x3, x3' = u, y = x3^3, "
                    "V = x3^4/4 in (r, theta, x3) with r > 0; Gamma = {(1,0,0)}, "
                    "O = {x3=0}. Gamma attracts relative to O but is unstable there, so "
                    "u = -y does not stabilise it.",
        box=box, ps=ps, feedback=output_feedback(sys),
        Gamma=point_set((1.0, 0.0, 0.0), space=space, name="{(1,0,0)}"),
        O=O, V0=O, S_prime=O, x0=(1.0, 0.5, 0.5),
        settings={"reduction_theorem": "sas", "global": False, "horizon": 200.0,
                  "samples": 16, "neighborhood": 0.1, "jplus_T": 200.0},
        tags=("worked-example", "limit-residuals"),
        expected={"passivity": "holds", "feedback_admissible": "holds",
                  "reduction.conclusion": "fails", "reduction.i": "fails",
                  "reduction.ii": "holds", "reduction.iii": "holds",
                  "reduction.consistent": True, "lemma4": "holds",
                  "gamma_detect": "fails", "sufficient_conditions": "fails",
                  "alternative_condition": "fails", "theorem5.consistent": True})


# --------------------------------------------------------------------------
# five-state: Gamma-detectable with a flat output channel
# --------------------------------------------------------------------------

@_named("five.f")
def five_f(x):
    return [-x[0] - x[0] * x[3], -x[1] + x[0] - x[3] * x[3], x[4] * x[4],
            x[0] * x[0], -x[2] * x[4]]


@_named("five.g2")
def five_g2(x):
    return [0.0, 0.0, 0.0, smath.flat_exp(x[3]), 0.0]


@_named("five.h1")
def five_h1(x):
    return x[2]


@_named("five.h2")
def five_h2(x):
    return x[3] * smath.flat_exp(x[3])


@_named("five.V")
def five_V(x):
    return 0.5 * (x[0] * x[0] + x[2] * x[2] + x[3] * x[3] + x[4] * x[4])


def five_state():
    box = tuple((-1.0, 1.0) for _ in range(5))
    sys = ControlAffineSystem(SmoothField(five_f, 5, name="five.f"),
                              (SmoothField(_e(5, 2), 5, name="e3"),
                               SmoothField(five_g2, 5, name="five.g2")),
                              (SmoothScalar(five_h1, 5, name="x3"),
                               SmoothScalar(five_h2, 5, name="x4*exp(-1/x4^2)")),
                              name="five-state")
    ps = PassiveSystem(sys, SmoothScalar(five_V, 5, name="V"))
    O = coordinate_subspace((0, 2, 3, 4), 5, box, name="{x1=x3=x4=x5=0}")
    return Scenario(
        name="five-state",
        description="Five-state passive system with output (x3, x4 exp(-1/x4^2)); "
                    "Gamma = {0}, O = {x1=x3=x4=x5=0}, S' = {x3=x4=x5=0}.",
        box=box, ps=ps, feedback=output_feedback(sys),
        Gamma=point_set(np.zeros(5), name="{0}"), O=O, V0=O,
        S_prime=coordinate_subspace((2, 3, 4), 5, box, name="{x3=x4=x5=0}"),
        x0=(0.01, 0.0, 0.01, 0.01, 0.01),
        settings={"reduction_theorem": "sas", "global": False, "horizon": 200.0,
                  "samples": 16, "neighborhood": 0.1, "jplus_T": 20.0},
        tags=("worked-example", "limit-residuals"),
        expected={"passivity": "holds", "feedback_admissible": "holds",
                  "reduction.i": "holds", "reduction.ii": "holds",
                  "reduction.consistent": True, "lemma4": "holds",
                  "gamma_detect": "holds", "sufficient_conditions": "holds",
                  "alternative_condition": "holds"})


# --------------------------------------------------------------------------
# small systems with known answers
# --------------------------------------------------------------------------

@_named("integrator.f")
def zero1(x):
    return [0.0 * x[0]]


@_named("integrator.V")
def integrator_V(x):
    return 0.5 * x[0] * x[0]


def integrator():
    box = ((-2.0, 2.0),)
    sys = ControlAffineSystem(SmoothField(zero1, 1, name="0"),
                              (SmoothField(_e(1, 0), 1, name="1"),),
                              (SmoothScalar(lambda x: x[0], 1, name="x"),), name="integrator")
    ps = PassiveSystem(sys, SmoothScalar(integrator_V, 1, name="x^2/2"))
    G = point_set((0.0,), name="{0}")
    return Scenario(
        name="integrator", description="x' = u, y = x, V = x^2/2; Gamma = O = {0}.",
        box=box, ps=ps, feedback=output_feedback(sys), Gamma=G, O=G, V0=G, S_prime=G,
        settings={"reduction_theorem": "sas", "global": True, "horizon": 50.0,
                  "samples": 16},
        tags=("zero-state-equivalence", "V-detect-equivalence", "uniform-attraction"), x0=(1.5,),
        expected={"passivity": "holds", "feedback_admissible": "holds",
                  "reduction.conclusion": "holds", "reduction.consistent": True,
                  "zero_state": "holds", "V_detect": "holds", "gamma_detect": "holds",
                  "sufficient_conditions": "holds", "theorem5.consistent": True})


@_named("oscillator.f")
def oscillator_f(x):
    return [x[1], -x[0], 0.0 * x[2]]


@_named("half_norm2")
def half_norm2(x):
    return 0.5 * sum(xi * xi for xi in x)


def oscillator():
    box = tuple((-1.0, 1.0) for _ in range(3))
    sys = ControlAffineSystem(SmoothField(oscillator_f, 3, name="oscillator.f"),
                              (SmoothField(_e(3, 2), 3, name="e3"),),
                              (SmoothScalar(lambda x: x[2], 3, name="x3"),), name="oscillator")
    ps = PassiveSystem(sys, SmoothScalar(half_norm2, 3, name="|x|^2/2"))
    O = coordinate_subspace((2,), 3, box, name="{x3=0}")
    return Scenario(
        name="oscillator",
        description="Undamped oscillator in (x1, x2) plus an integrator x3' = u, y = x3; "
                    "not detectable: O = {x3=0} carries the oscillation.",
        box=box, ps=ps, feedback=output_feedback(sys), Gamma=point_set(np.zeros(3), name="{0}"),
        O=O, V0=point_set(np.zeros(3), name="{0}"), S_prime=O,
        settings={"reduction_theorem": "sas", "global": False, "horizon": 100.0,
                  "samples": 16, "neighborhood": 0.2},
        tags=("zero-state-equivalence", "V-detect-equivalence", "uniform-attraction"), x0=(0.5, 0.0, 0.5),
        expected={"passivity": "holds", "feedback_admissible": "holds",
                  "reduction.conclusion": "fails", "reduction.consistent": True,
                  "zero_state": "fails", "V_detect": "fails", "gamma_detect": "fails",
                  "sufficient_conditions": "fails", "theorem5.consistent": True})


@_named("decoupled.f")
def decoupled_f(x):
    return [-x[0], 0.0 * x[1]]


def decoupled():
    box = ((-1.0, 1.0), (-1.0, 1.0))
    sys = ControlAffineSystem(SmoothField(decoupled_f, 2, name="decoupled.f"),
                              (SmoothField(_e(2, 1), 2, name="e2"),),
                              (SmoothScalar(lambda x: x[1], 2, name="x2"),), name="decoupled")
    ps = PassiveSystem(sys, SmoothScalar(half_norm2, 2, name="|x|^2/2"))
    O = coordinate_subspace((1,), 2, box, name="{x2=0}")
    G = point_set(np.zeros(2), name="{0}")
    return Scenario(
        name="decoupled",
        description="x1' = -x1, x2' = u, y = x2, V = |x|^2/2; detectable, O = {x2=0}.",
        box=box, ps=ps, feedback=output_feedback(sys), Gamma=G, O=O, V0=G, S_prime=O,
        settings={"reduction_theorem": "sas", "global": True, "horizon": 50.0,
                  "samples": 16},
        tags=("zero-state-equivalence", "V-detect-equivalence", "uniform-attraction"), x0=(1.0, 1.0),
        expected={"passivity": "holds", "feedback_admissible": "holds",
                  "reduction.conclusion": "holds", "reduction.consistent": True,
                  "zero_state": "holds", "V_detect": "holds", "gamma_detect": "holds",
                  "sufficient_conditions": "holds", "alternative_condition": "holds",
                  "theorem5.consistent": True})


@_named("circle.f")
def circle_f(x):
    return [-x[1], x[0]]


@_named("circle.g")
def circle_g(x):
    return [x[0], x[1]]


@_named("circle.h")
def circle_h(x):
    r2 = x[0] * x[0] + x[1] * x[1]
    return (r2 - 1.0) * r2


@_named("circle.V")
def circle_V(x):
    r2 = x[0] * x[0] + x[1] * x[1]
    return (r2 - 1.0) ** 2 / 4.0


def _unit_circle(name="unit circle"):
    def dist(X):
        X = np.asarray(X, dtype=float)
        return np.abs(np.linalg.norm(X, axis=-1) - 1.0)

    def sample_on(rng, k):
        t = rng.uniform(-math.pi, math.pi, k)
        return np.column_stack([np.cos(t), np.sin(t)])

    def project(X):
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=-1, keepdims=True)
        return np.where(r > 0, X / np.where(r > 0, r, 1.0), np.array([1.0, 0.0]))

    return ClosedSetSpec(name, 2, dist, sample_on, project, bounded=True)


def _circle_and_origin():
    circ = _unit_circle()

    def dist(X):
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        return np.minimum(np.abs(r - 1.0), r)

    def sample_on(rng, k):
        P = circ.sample_on(rng, k)
        if k >= 4:
            P[::4] = 0.0
        return P

    def project(X):
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=-1, keepdims=True)
        return np.where(r < 0.5, 0.0 * X, circ.project(X))

    return ClosedSetSpec("unit circle + origin", 2, dist, sample_on, project, bounded=True)


def circle():
    box = ((-1.5, 1.5), (-1.5, 1.5))
    sys = ControlAffineSystem(SmoothField(circle_f, 2, name="rotation"),
                              (SmoothField(circle_g, 2, name="radial"),),
                              (SmoothScalar(circle_h, 2, name="(r^2-1)r^2"),), name="circle")
    ps = PassiveSystem(sys, SmoothScalar(circle_V, 2, name="(r^2-1)^2/4"))
    G = _unit_circle()
    return Scenario(
        name="circle",
        description="Rotation with a radial input, storage (|x|^2-1)^2/4; Gamma = V^-1(0) "
                    "is the unit circle and O adds the origin, so detectability holds "
                    "locally but not globally. Invented to exercise compact non-point sets.",
        box=box, ps=ps, feedback=output_feedback(sys), Gamma=G, O=_circle_and_origin(),
        V0=G, settings={"reduction_theorem": "sas", "global": False, "horizon": 50.0,
                        "samples": 16, "neighborhood": 0.2},
        tags=("V-detect-equivalence",), invented=True, x0=(1.3, 0.0),
        expected={"passivity": "holds", "feedback_admissible": "holds",
                  "reduction.conclusion": "holds", "reduction.consistent": True,
                  "V_detect": "holds", "gamma_detect": "holds",
                  "V_detect.global": "fails", "gamma_detect.global": "fails",
                  "theorem5.consistent": True})


# --------------------------------------------------------------------------
# plain fields and cascades
# --------------------------------------------------------------------------

@_named("contracting.f")
def contracting_f(x):
    return [-x[0], -x[1]]


def contracting():
    box = ((-1.0, 1.0), (-1.0, 1.0))
    return Scenario(
        name="contracting", description="x' = -x, y' = -y; Gamma = {0}, O = {y=0}.",
        box=box, field=SmoothField(contracting_f, 2, name="contracting"),
        Gamma=point_set(np.zeros(2), name="{0}"),
        O=coordinate_subspace((1,), 2, box, name="{y=0}"),
        settings={"reduction_theorem": "attractivity", "global": False, "horizon": 30.0,
                  "samples": 16},
        tags=("uniform-attraction",), x0=(1.0, 1.0),
        expected={"reduction.conclusion": "holds", "reduction.i": "holds",
                  "reduction.ii": "holds", "reduction.iii": "holds",
                  "reduction.consistent": True})


@_named("saddle.f")
def saddle_f(x):
    return [-x[0], -x[1], x[2]]


def saddle():
    box = tuple((-1.0, 1.0) for _ in range(3))
    return Scenario(
        name="saddle",
        description="x1' = -x1, x2' = -x2, x3' = x3: O = {x3=0} is attractive and "
                    "asymptotically stable relative to itself but not locally stable "
                    "near Gamma = {0}.",
        box=box, field=SmoothField(saddle_f, 3, name="saddle"),
        Gamma=point_set(np.zeros(3), name="{0}"),
        O=coordinate_subspace((2,), 3, box, name="{x3=0}"),
        settings={"reduction_theorem": "sas", "global": False, "horizon": 20.0,
                  "samples": 16, "r_max": 1e3},
        tags=(), x0=(0.5, 0.5, 1e-3),
        expected={"reduction.conclusion": "fails", "reduction.i": "holds",
                  "reduction.ii": "fails", "reduction.consistent": True})


@_named("cascade.fxy")
def cascade_fxy(z):
    return [-z[0] + z[0] * z[1]]


@_named("cascade.gy")
def cascade_gy(y):
    return [-y[0]]


@_named("cascade.unstable_fxy")
def cascade_unstable_fxy(z):
    return [-z[0]]


@_named("cascade.unstable_gy")
def cascade_unstable_gy(y):
    return [y[0]]


def _product(fxy, gy, n1, n2, name):
    def fn(z):
        return list(fxy(z)) + list(gy([z[n1 + j] for j in range(n2)]))
    return SmoothField(fn, n1 + n2, name=name)


def cascade():
    box = ((-2.0, 2.0), (-2.0, 2.0))
    return Scenario(
        name="cascade",
        description="x' = -x + x y, y' = -y (invented demonstration cascade); "
                    "Gamma = {(0,0)}, O = {y=0}.",
        box=box, field=_product(cascade_fxy, cascade_gy, 1, 1, "cascade"),
        Gamma=point_set(np.zeros(2), name="{(0,0)}"),
        O=coordinate_subspace((1,), 2, box, name="{y=0}"),
        cascade={"fxy": cascade_fxy, "gy": cascade_gy, "n1": 1, "n2": 1,
                 "Gamma_x": point_set((0.0,), name="{0}"), "box_x": ((-2.0, 2.0),),
                 "box_y": ((-2.0, 2.0),)},
        settings={"reduction_theorem": "attractivity", "global": True, "horizon": 30.0,
                  "samples": 16},
        invented=True, tags=("uniform-attraction",), x0=(1.5, 1.5),
        expected={"reduction.conclusion": "holds", "reduction.consistent": True,
                  "cascade.conclusion": "holds", "cascade.consistent": True})


def cascade_unstable():
    box = ((-1.0, 1.0), (-1.0, 1.0))
    return Scenario(
        name="cascade-unstable",
        description="x' = -x, y' = y: the driving subsystem is unstable.",
        box=box, field=_product(cascade_unstable_fxy, cascade_unstable_gy, 1, 1,
                                "cascade-unstable"),
        Gamma=point_set(np.zeros(2), name="{(0,0)}"),
        O=coordinate_subspace((1,), 2, box, name="{y=0}"),
        cascade={"fxy": cascade_unstable_fxy, "gy": cascade_unstable_gy, "n1": 1, "n2": 1,
                 "Gamma_x": point_set((0.0,), name="{0}"), "box_x": ((-1.0, 1.0),),
                 "box_y": ((-1.0, 1.0),)},
        settings={"global": False, "horizon": 20.0, "samples": 16, "r_max": 1e3},
        tags=(), x0=(0.5, 1e-3),
        expected={"cascade.ii": "fails", "cascade.consistent": True})


@_named("cascade_unbounded.fxy")
def cascade_unbounded_fxy(z):
    # rotation in (x1, x2) scaled by y, plus damping of x2
    return [-z[2] * z[1], -z[1] + z[2] * z[0]]


def cascade_unbounded():
    box = ((-2.0, 2.0), (-1.0, 1.0), (-1.0, 1.0))
    Gx = coordinate_subspace((1,), 2, ((-2.0, 2.0), (-1.0, 1.0)), name="{x2=0}")
    return Scenario(
        name="cascade-unbounded",
        description="x1' = -y x2, x2' = -x2 + y x1, y' = -y (invented). With y = 0 the "
                    "x1-axis Gamma = {x2=0} is globally semi-asymptotically stable; the "
                    "lifted set {x2=0, y=0} is unbounded, so local uniform boundedness "
                    "is part of the hypotheses. |x| is nonincreasing, hence bounded.",
        box=box, field=_product(cascade_unbounded_fxy, cascade_gy, 2, 1, "cascade-unbounded"),
        Gamma=coordinate_subspace((1, 2), 3, box, name="{x2=0,y=0}"),
        O=coordinate_subspace((2,), 3, box, name="{y=0}"),
        cascade={"fxy": cascade_unbounded_fxy, "gy": cascade_gy, "n1": 2, "n2": 1,
                 "Gamma_x": Gx, "box_x": ((-2.0, 2.0), (-1.0, 1.0)),
                 "box_y": ((-1.0, 1.0),)},
        settings={"global": True, "horizon": 40.0, "samples": 16},
        invented=True, tags=(), x0=(1.0, 0.5, 0.5),
        expected={"cascade.iii": "holds", "cascade.conclusion": "holds",
                  "cascade.consistent": True})


def random_cascade(seed, n1=2, n2=2):
    """Randomised cascade x' = A x + (c.y) x + D y, y' = B y with A, B Hurwitz.

    ``Gamma = {0}`` is globally asymptotically stable for ``x' = A x``;
    since ``y`` decays exponentially the coupling has finite gain and
    all solutions are bounded, so every hypothesis of the cascade
    reduction holds.
    """
    rng = np.random.default_rng(seed)

    def hurwitz(k):
        M = rng.normal(size=(k, k))
        S = rng.normal(size=(k, k))
        return -(M @ M.T / k + 0.5 * np.eye(k)) + 0.5 * (S - S.T)

    A, B = hurwitz(n1), hurwitz(n2)
    c = rng.normal(size=n2) * 0.5
    D = rng.normal(size=(n1, n2)) * 0.5
    Al, Bl, cl, Dl = A.tolist(), B.tolist(), c.tolist(), D.tolist()

    def fxy(z):
        y = [z[n1 + j] for j in range(n2)]
        s = sum(cl[j] * y[j] for j in range(n2))
        return [sum(Al[i][k] * z[k] for k in range(n1)) + s * z[i]
                + sum(Dl[i][j] * y[j] for j in range(n2)) for i in range(n1)]

    def gy(y):
        return [sum(Bl[i][j] * y[j] for j in range(n2)) for i in range(n2)]

    n = n1 + n2
    box = tuple((-1.0, 1.0) for _ in range(n))
    return Scenario(
        name=f"random-cascade-{seed}",
        description="randomised linear-plus-bilinear cascade (invented)",
        box=box, field=_product(fxy, gy, n1, n2, f"random-cascade-{seed}"),
        Gamma=point_set(np.zeros(n), name="{0}"),
        O=coordinate_subspace(tuple(range(n1, n)), n, box, name="{y=0}"),
        cascade={"fxy": fxy, "gy": gy, "n1": n1, "n2": n2,
                 "Gamma_x": point_set(np.zeros(n1), name="{0}"),
                 "box_x": box[:n1], "box_y": box[n1:]},
        settings={"global": True, "horizon": 40.0, "samples": 8},
        invented=True, x0=tuple([0.5] * n),
        expected={"cascade.consistent": True})


register("example1", example1, aliases=("example-1", "ex1"))
register("example-polar", example_polar, aliases=("example3", "polar"))
register("five-state", five_state, aliases=("5-state", "five"))
register("integrator", integrator)
register("oscillator", oscillator)
register("decoupled", decoupled)
register("circle", circle)
register("contracting", contracting)
register("saddle", saddle)
register("cascade", cascade)
register("cascade-unstable", cascade_unstable)
register("cascade-unbounded", cascade_unbounded)

import numpy as np
import pytest

from setstab import scenarios
from setstab.core import InputError, output_feedback
from setstab.detectability import (OSetSpec, check_alternative_condition, check_detectability,
                                   check_lemma4, check_sufficient_conditions, gauss_newton,
                                   open_loop, probe_O_membership, s_prime_norm, theorem5_harness)
from setstab.integrate import IntegratorConfig
from setstab.scenarios import regression
from setstab.stability import check_property

ALL = [scenarios.load(n) for n in scenarios.names()] + \
    [scenarios.load_file(p) for p in scenarios.data_files()]
PASSIVE = [sc for sc in ALL if sc.ps is not None]


def _gamma_is_V0(sc, rng, tol=1e-9):
    """Gamma is compact and equals V^-1(0), judged on samples.

    V must vanish on Gamma and on the declared V^-1(0), and be positive
    on points of O and of the box away from Gamma.
    """
    if sc.V0 is None or not sc.Gamma.bounded:
        return False
    V = sc.ps.V.batch
    G = np.atleast_2d(sc.Gamma.sample_on(rng, 16))
    Z = np.atleast_2d(sc.V0.sample_on(rng, 16))
    B = sc.box_array
    X = rng.uniform(B[:, 0], B[:, 1], size=(500, sc.n))
    if sc.O is not None:
        X = np.vstack([X, np.atleast_2d(sc.O.sample_on(rng, 100))])
    X = X[sc.space.contains(X) & (sc.Gamma.dist(X) > 1e-6)]
    return bool(np.all(V(G) <= tol) and np.all(sc.Gamma.dist(Z) <= 1e-7)
                and np.all(V(X) > 0))


def _gamma_is_origin(sc, rng):
    G = np.atleast_2d(sc.Gamma.sample_on(rng, 4))
    return bool(np.all(np.abs(G) <= 1e-12))


R = np.random.default_rng(7)
# V >= 0 vanishing exactly on Gamma = {0} is positive definite
ORIGIN_PD = [sc for sc in PASSIVE if _gamma_is_origin(sc, R) and _gamma_is_V0(sc, R)]
GAMMA_IS_V0 = [sc for sc in PASSIVE if _gamma_is_V0(sc, R)]


def _detect(sc, kind, local=True):
    st = sc.settings
    return check_detectability(sc.ps, sc.Gamma, sc.O, kind, local=local,
                               cfg=regression.config(sc), box=sc.box,
                               radius=st.get("neighborhood", 0.1),
                               horizon=st.get("horizon", 200.0), q=regression.query(sc))


def _modes(sc):
    return [True] + ([False] if "global" in sc.settings.get("detect_modes",
                                                            ("local", "global")) else [])


def test_precondition_filters_are_not_vacuous():
    assert {sc.name for sc in ORIGIN_PD} >= {"integrator", "decoupled", "mass-spring"}
    assert {sc.name for sc in GAMMA_IS_V0} >= {"circle", "integrator"}
    excluded = {sc.name for sc in ORIGIN_PD + GAMMA_IS_V0}
    assert "example-polar" not in excluded and "five-state" not in excluded


# -- O membership ---------------------------------------------------------

def test_probe_polar_invariant_point_is_in_O():
    sys = scenarios.load("example-polar").ps.sys
    assert probe_O_membership(sys, np.array([2.0, 1.0, 0.0]))["result"] == "in_O"


def test_probe_polar_nonzero_output_is_out():
    sys = scenarios.load("example-polar").ps.sys
    res = probe_O_membership(sys, np.array([1.0, 0.0, 0.5]))
    assert res["result"] == "out" and res["max_h"] == pytest.approx(0.125)


@pytest.mark.parametrize("sc", PASSIVE, ids=lambda s: s.name)
def test_probe_points_of_gamma_are_in_O(sc, rng):
    for x in np.atleast_2d(sc.Gamma.sample_on(rng, 3)):
        assert probe_O_membership(sc.ps.sys, x, IntegratorConfig(T=50.0))["result"] == "in_O"


def test_probe_rejects_bad_points():
    sys = scenarios.load("example-polar").ps.sys
    with pytest.raises(InputError):
        probe_O_membership(sys, np.array([1.0, np.nan, 0.0]))


def test_probe_mode_sampling_lands_on_O(rng):
    sc = scenarios.load("example-polar")
    P = OSetSpec.probe().sample(sc.ps.sys, rng, 4, box=sc.box, cfg=IntegratorConfig(T=20.0))
    assert len(P) == 4 and np.all(np.abs(P[:, 2]) < 1e-3)


def test_explicit_O_requires_spec():
    with pytest.raises(InputError):
        OSetSpec("explicit")
    with pytest.raises(InputError):
        OSetSpec("bogus")


@pytest.mark.parametrize("sc", [s for s in PASSIVE if s.O is not None], ids=lambda s: s.name)
def test_O_inside_S_prime(sc, rng):
    P = np.atleast_2d(sc.O.sample_on(rng, 50))
    P = P[sc.space.contains(P)]
    assert np.max(s_prime_norm(sc.ps.sys, sc.ps.r, P)) <= 1e-6


def test_gauss_newton_finds_root():
    x, nr = gauss_newton(lambda z: np.array([z[0] ** 2 - 2.0, z[1] - z[0]]), [1.0, 0.0])
    assert nr < 1e-12 and x[0] == pytest.approx(np.sqrt(2.0))


# -- detectability verdicts ---------------------------------------------------

def test_five_state_is_gamma_detectable():
    sc = scenarios.load("five-state")
    assert _detect(sc, "gamma_detect").outcome == "holds"


def test_polar_not_detectable_but_relatively_attractive():
    sc = scenarios.load("example-polar")
    v = _detect(sc, "gamma_detect")
    assert v.outcome == "fails"
    att = regression.query(sc).with_prop("semi_attractor", relative_to=sc.O)
    assert check_property(open_loop(sc.ps), sc.Gamma, att,
                          regression.config(sc)).outcome == "holds"


def test_zero_state_requires_origin():
    sc = scenarios.load("example-polar")
    with pytest.raises(InputError):
        _detect(sc, "zero_state")


def test_unknown_kind_and_missing_box():
    sc = scenarios.load("integrator")
    with pytest.raises(InputError):
        check_detectability(sc.ps, sc.Gamma, sc.O, "bogus")
    with pytest.raises(InputError):
        check_detectability(sc.ps, sc.Gamma, sc.O, "V_detect", local=False)


@pytest.mark.parametrize("sc", ORIGIN_PD, ids=lambda s: s.name)
def test_zero_state_gamma_and_relative_attractivity_agree(sc):
    fld, cfg = open_loop(sc.ps), regression.config(sc)
    for local in _modes(sc):
        zs = _detect(sc, "zero_state", local).outcome
        gd = _detect(sc, "gamma_detect", local).outcome
        prop = "semi_attractor" if local else "global_attractor"
        att = check_property(fld, sc.Gamma, regression.query(sc).with_prop(
            prop, relative_to=sc.O, box=sc.box), cfg).outcome
        assert zs == gd == att, (sc.name, local, zs, gd, att)


@pytest.mark.parametrize("sc", GAMMA_IS_V0, ids=lambda s: s.name)
def test_V_detect_and_gamma_detect_agree(sc):
    for local in _modes(sc):
        assert _detect(sc, "V_detect", local).outcome == _detect(sc, "gamma_detect",
                                                                  local).outcome


# -- sufficient conditions --------------------------------------------------

def _sufficient(sc):
    st = sc.settings
    return check_sufficient_conditions(sc.ps, sc.Gamma, regression.config(sc).replace(
        T=st.get("horizon", 200.0)), box=sc.box, S_prime=sc.S_prime,
        jplus_T=st.get("jplus_T", 20.0), gamma_is_V0=bool(st.get("gamma_is_V0", False)))


@pytest.mark.parametrize("name,expected", [("five-state", "holds"), ("integrator", "holds"),
                                           ("example-polar", "fails")])
def test_sufficient_conditions_examples(name, expected):
    assert _sufficient(scenarios.load(name)).outcome == expected


def test_polar_sufficient_conditions_witness_on_circle():
    v = _sufficient(scenarios.load("example-polar"))
    part = {p.prop: p for p in v.details["parts"]}["S'_J+_in_Gamma"]
    assert part.outcome == "fails"
    w = part.witness
    assert abs(w["point"][0] - 1.0) < 0.05 and w["distance"] > 0.02


@pytest.mark.parametrize("name", ["five-state", "integrator", "decoupled"])
def test_sufficient_conditions_imply_detectability(name):
    sc = scenarios.load(name)
    if _sufficient(sc).holds:
        assert _detect(sc, "gamma_detect").outcome == "holds"


def test_sampled_S_prime_for_integrator():
    sc = scenarios.load("integrator")
    v = check_sufficient_conditions(sc.ps, sc.Gamma, IntegratorConfig(T=20.0), box=sc.box)
    assert v.outcome == "holds"
    with pytest.raises(InputError):
        check_sufficient_conditions(sc.ps, sc.Gamma)


# -- limit-point residuals and the alternative condition -------------------------------------

@pytest.mark.parametrize("name", ["example1", "example-polar", "five-state"])
def test_lemma4_on_limit_clouds(name):
    sc = scenarios.load(name)
    v = check_lemma4(sc.ps, regression.lemma4_cloud(sc, regression.config(sc)))
    assert v.outcome == "holds"
    assert v.details["in_S"] > 0


def test_lemma4_edge_cases():
    sc = scenarios.load("example1")
    assert check_lemma4(sc.ps, np.empty((0, 3))).outcome == "inconclusive"


@pytest.mark.parametrize("name,expected", [("example-polar", "fails"), ("five-state", "holds"),
                                           ("integrator", "holds")])
def test_alternative_condition(name, expected):
    sc = scenarios.load(name)
    v = check_alternative_condition(sc.ps, sc.Gamma, sc.O, sc.V0, regression.config(sc),
                                    q=regression.query(sc), box=sc.box)
    assert v.outcome == expected


def test_alternative_condition_needs_V0():
    sc = scenarios.load("integrator")
    with pytest.raises(InputError):
        check_alternative_condition(sc.ps, sc.Gamma, sc.O, None)


# -- detectability versus closed-loop stability ---------------------------------

def _harness(sc):
    return theorem5_harness(sc.ps, sc.feedback, sc.Gamma, sc.O, regression.config(sc),
                            global_=bool(sc.settings.get("global", False)),
                            q=regression.query(sc), box=sc.box)


def test_harness_integrator_detectable_and_gas():
    rep = _harness(scenarios.load("integrator"))
    assert rep.outcome("detectable") == "holds" and rep.outcome("conclusion") == "holds"
    assert rep.consistent is True


def test_harness_polar_neither():
    rep = _harness(scenarios.load("example-polar"))
    assert rep.outcome("detectable") == "fails" and rep.outcome("conclusion") == "fails"
    assert rep.consistent is True and rep.status == "verified"


def test_harness_five_state_detectable_and_closed_loop_stable():
    rep = _harness(scenarios.load("five-state"))
    assert rep.outcome("detectable") == "holds"
    assert rep.outcome("conclusion") == "holds"
    assert rep.consistent is True


def test_harness_rejects_non_passivity_feedback():
    sc = scenarios.load("integrator")
    with pytest.raises(InputError):
        theorem5_harness(sc.ps, output_feedback(sc.ps.sys, -1.0), sc.Gamma, sc.O,
                         box=sc.box)
    with pytest.raises(InputError):
        theorem5_harness(sc.ps, sc.feedback, sc.Gamma, sc.O)

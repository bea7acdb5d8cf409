"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records the measured quantities through the ``criterion``
fixture; the run ends with one PASS/FAIL line per criterion.
"""
import numpy as np
import pytest

from setstab import scenarios
from setstab.calculus import s_prime_residual
from setstab.detectability import check_lemma4, check_sufficient_conditions
from setstab.integrate import IntegratorConfig, integrate, integrate_closed_loop
from setstab.passivity import check_storage_monotone, passivity_residuals
from setstab.scenarios import regression
from setstab.scenarios.builtin import random_cascade
from setstab.stability import check_property

from oracles import example1_closed, five_closed, polar_closed, rk4, x3_decay
from test_detectability import ORIGIN_PD, GAMMA_IS_V0, _detect, _modes

BUILTIN = [scenarios.load(n) for n in scenarios.names()]
FILES = [scenarios.load_file(p) for p in scenarios.data_files()]
ALL = BUILTIN + FILES
PASSIVE = [sc for sc in ALL if sc.ps is not None and sc.feedback is not None]
WORKED = ["example1", "example-polar", "five-state"]
# long enough for x3 ~ t^(-1/2) from 0.5 to fall below 1e-3 in the tail window
TAIL_T = 1e6


def _box_points(sc, rng, k):
    B = sc.box_array
    X = rng.uniform(B[:, 0], B[:, 1], size=(k, sc.n))
    return X[sc.space.contains(X)]


# -- 1 ----------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["example-polar", "five-state"])
def test_1_passivity_identities(name, criterion):
    sc = scenarios.load(name)
    X = _box_points(sc, np.random.default_rng(1), 10_000)
    LfV, gap, _ = passivity_residuals(sc.ps, X)
    worst = max(float(gap.max()), float(np.maximum(LfV, 0).max()))
    ok = criterion(1, worst < 1e-9 and len(X) == 10_000,
                   f"{name}: max residual {worst:.2e} over {len(X)} samples (< 1e-9)")
    assert ok


# -- 2 ----------------------------------------------------------------------------

@pytest.mark.parametrize("sc", PASSIVE, ids=lambda s: s.name)
def test_2_storage_monotone(sc, criterion):
    rng = np.random.default_rng(2)
    cfg = regression.config(sc).replace(T=min(sc.settings.get("horizon", 200.0), 100.0))
    worst, bad = -np.inf, 0
    for x0 in _box_points(sc, rng, 100):
        tr = integrate_closed_loop(sc.ps, sc.feedback, x0, cfg, on_nan="flag")
        v = check_storage_monotone(tr, solver_tol=0.0, tol=1e-8)
        worst = max(worst, v.details.get("max_increase", -np.inf))
        bad += v.fails
    ok = criterion(2, bad == 0, f"{sc.name}: max per-step increase {worst:.1e} (< 1e-8)")
    assert ok


# -- 3 ----------------------------------------------------------------------------

def test_3_example1(criterion):
    sc = scenarios.load("example1")
    fld = sc.closed_loop()
    x0 = [1.0, 0.0, 0.5]
    tr = integrate(fld, x0, IntegratorConfig(T=100.0))
    drift = float(np.max(np.abs(tr.states[:, 0] ** 2 + tr.states[:, 1] ** 2 - 1.0)))
    long = integrate(fld, x0, IntegratorConfig(T=TAIL_T))
    tail = long.times >= 0.8 * TAIL_T
    dO = float(sc.O.dist(long.states[tail]).max())
    dG = float(sc.Gamma.dist(long.states[tail]).max())
    ok = criterion(3, drift < 1e-8 and dO < 1e-3 and dG > 0.5,
                   f"radius drift {drift:.1e} (< 1e-8), tail dist to O {dO:.1e} (< 1e-3), "
                   f"tail dist to Gamma {dG:.3f} (> 0.5)")
    assert ok


# -- 4 ----------------------------------------------------------------------------

def test_4_example_polar(criterion):
    sc = scenarios.load("example-polar")
    long = integrate(sc.closed_loop(), [1.0, 0.0, 0.5], IntegratorConfig(T=TAIL_T))
    tail = long.times >= 0.8 * TAIL_T
    dO = float(sc.O.dist(long.states[tail]).max())
    dG = float(sc.Gamma.dist(long.states[tail]).max())
    rep = regression.run_reduction(sc, regression.config(sc), theorem="sas")
    pattern = (rep.outcome("i"), rep.outcome("ii"), rep.outcome("iii"))
    ok = criterion(4, dO < 1e-3 and dG > 1.0 and pattern == ("fails", "holds", "holds"),
                   f"tail dist to O {dO:.1e} (< 1e-3), tail sup dist to Gamma {dG:.3f} "
                   f"(> 1), hypotheses (i,ii,iii) = {pattern}")
    assert ok


# -- 5 ----------------------------------------------------------------------------

def test_5_five_state_s_prime(criterion):
    sc = scenarios.load("five-state")
    rng = np.random.default_rng(5)
    P = rng.uniform(-1, 1, size=(1000, 5))
    P[:, 2:] = 0.0
    on = max(float(np.max(np.abs(s_prime_residual(sc.ps.sys, sc.ps.r, x)))) for x in P)
    G = rng.uniform(-1, 1, size=(1000, 5))
    off = min(float(np.max(np.abs(s_prime_residual(sc.ps.sys, sc.ps.r, x)))) for x in G)
    ok = criterion(5, on < 1e-9 and off > 1e-3,
                   f"S' residual on {{x3=x4=x5=0}} {on:.1e} (< 1e-9), generic {off:.1e} "
                   "(> 1e-3)")
    assert ok


def test_5_five_state_sufficient_conditions(criterion):
    sc = scenarios.load("five-state")
    st = sc.settings
    v = check_sufficient_conditions(sc.ps, sc.Gamma, regression.config(sc).replace(
        T=st["horizon"]), box=sc.box, S_prime=sc.S_prime, jplus_T=st["jplus_T"])
    ok = criterion(5, v.holds, f"sufficient conditions {v.outcome}")
    assert ok


def test_5_five_state_closed_loop_decay(criterion):
    sc = scenarios.load("five-state")
    X0 = sc.space.sample_ball(np.random.default_rng(50), np.zeros(5), 1e-2, 50)
    cfg = IntegratorConfig(T=200.0)
    final = np.array([np.linalg.norm(integrate(sc.closed_loop(), x, cfg).final) for x in X0])
    ok = criterion(5, final.max() < 1e-3,
                   f"closed loop: {int((final < 1e-3).sum())}/50 ICs reach |x(200)| < 1e-3, "
                   f"worst {final.max():.2e}")
    assert ok


# -- 6 ----------------------------------------------------------------------------

@pytest.mark.parametrize("name", WORKED)
def test_6_lemma4(name, criterion):
    sc = scenarios.load(name)
    v = check_lemma4(sc.ps, regression.lemma4_cloud(sc, regression.config(sc)), band=1e-6)
    d = v.details
    ok = criterion(6, v.holds, f"{name}: {v.outcome} on {d.get('points')} points "
                               f"(in S {d.get('in_S')}, in S' {d.get('in_S_prime')})")
    assert ok


# -- 7 ----------------------------------------------------------------------------

def _reports(sc):
    out = []
    if sc.O is not None and (sc.ps is None or sc.feedback is not None or sc.field):
        out.append(regression.run_reduction(sc, regression.config(sc)))
    if sc.cascade is not None:
        out.append(regression.run_cascade(sc, regression.config(sc)))
    return out


def test_7_reduction_consistency(criterion):
    reps = [r for sc in ALL for r in _reports(sc)]
    reps += [regression.run_cascade(sc, regression.config(sc))
             for sc in (random_cascade(s) for s in range(20))]
    violations = sum(r.consistent is False for r in reps)
    counts = {s: sum(r.status == s for r in reps) for s in
              ("verified", "hypotheses-fail", "inconclusive")}
    ok = criterion(7, violations == 0,
                   f"{len(reps)} reports, {violations} violations, {counts}")
    assert ok


# -- 8 ----------------------------------------------------------------------------

def test_8_uniform_attraction_implies_sas(criterion):
    checked = 0
    for sc in BUILTIN + FILES:
        if not sc.Gamma.bounded:
            continue
        fld, cfg = sc.closed_loop(), regression.config(sc)
        for rel in (None, sc.O):
            q = regression.query(sc).with_prop("uniform_semi_attractor", relative_to=rel)
            if check_property(fld, sc.Gamma, q, cfg).outcome != "holds":
                continue
            checked += 1
            sas = check_property(fld, sc.Gamma, q.with_prop("semi_asymptotically_stable"),
                                 cfg).outcome
            ok = criterion(8, sas == "holds",
                           f"uniform => SAS on {sc.name} rel {rel and rel.name}: SAS {sas}")
            assert ok
    assert criterion(8, checked > 0, f"uniform => SAS: {checked} uniform cases")


def test_8_zero_state_detectability_equivalence(criterion):
    from setstab.detectability import open_loop
    for sc in ORIGIN_PD:
        for local in _modes(sc):
            zs = _detect(sc, "zero_state", local).outcome
            gd = _detect(sc, "gamma_detect", local).outcome
            prop = "semi_attractor" if local else "global_attractor"
            att = check_property(open_loop(sc.ps), sc.Gamma, regression.query(sc).with_prop(
                prop, relative_to=sc.O, box=sc.box), regression.config(sc)).outcome
            ok = criterion(8, zs == gd == att,
                           f"zero-state/gamma/attraction on {sc.name} ({'local' if local else 'global'}): "
                           f"{zs}/{gd}/{att}")
            assert ok


def test_8_V_detectability_equivalence(criterion):
    for sc in GAMMA_IS_V0:
        for local in _modes(sc):
            vd = _detect(sc, "V_detect", local).outcome
            gd = _detect(sc, "gamma_detect", local).outcome
            ok = criterion(8, vd == gd, f"V/gamma detect on {sc.name} "
                                        f"({'local' if local else 'global'}): {vd}/{gd}")
            assert ok


# -- 9 ----------------------------------------------------------------------------

def test_9_analytic_decay(criterion):
    fld = scenarios.load("example1").closed_loop()
    errs = [abs(integrate(fld, [0.0, 0.0, 1.0], IntegratorConfig(T=t)).final[2] - x3_decay(t))
            for t in (1.0, 2.0, 4.0)]
    ok = criterion(9, max(errs) < 1e-7, f"x3 error at t=1,2,4: {max(errs):.1e} (< 1e-7)")
    assert ok


HAND = {"example1": example1_closed, "example-polar": polar_closed, "five-state": five_closed}


def test_9_rk4_agreement(criterion):
    """Fixed-step RK4 endpoints versus the adaptive solver at T = 2.

    The three worked examples use hand-typed right-hand sides; the others
    use the scenario field evaluated on arrays.
    """
    rng = np.random.default_rng(9)
    worst, n = 0.0, 0
    for sc in ALL:
        fld = sc.closed_loop()
        X0 = _box_points(sc, rng, 3)
        if sc.x0 is not None:
            X0 = np.vstack([np.asarray(sc.x0, dtype=float), X0])
        rhs = HAND.get(sc.name, fld.batch)
        ref = rk4(rhs, X0, 2.0)
        cfg = regression.config(sc).replace(T=2.0)
        for x0, r in zip(X0, ref):
            tr = integrate(fld, x0, cfg, on_nan="flag")
            if tr.status != "ok":
                continue
            worst = max(worst, float(np.max(np.abs(tr.final - r))))
            n += 1
    ok = criterion(9, worst < 1e-6, f"RK4 endpoint gap {worst:.1e} over {n} trajectories "
                                    "(< 1e-6)")
    assert ok

import numpy as np
import pytest

from setstab import scenarios
from setstab.core import InputError, Verdict, coordinate_subspace, linear_field, point_set
from setstab.integrate import IntegratorConfig
from setstab.reduction import (assess, cascade_product, check_cascade,
                               check_reduction_attractivity, check_reduction_sas)
from setstab.scenarios import regression
from setstab.scenarios.builtin import random_cascade
from setstab.stability import StabilityQuery

W = {"x0": [0.0], "time": 1.0, "distance": 1.0}


def V(o):
    return Verdict("p", o, witness=W if o == "fails" else None)


@pytest.mark.parametrize("hyp,concl,status,consistent", [
    (["holds", "holds"], "holds", "verified", True),
    (["holds", "holds"], "fails", "violated", False),
    (["holds", "fails"], "fails", "hypotheses-fail", True),
    (["holds", "fails"], "holds", "hypotheses-fail", True),
    (["inconclusive", "fails"], "holds", "hypotheses-fail", True),
    (["holds", "inconclusive"], "holds", "inconclusive", None),
    (["holds"], "inconclusive", "inconclusive", None),
])
def test_assess_truth_table(hyp, concl, status, consistent):
    rep = assess("t", "local", {str(i): V(o) for i, o in enumerate(hyp)}, V(concl))
    assert (rep.status, rep.consistent) == (status, consistent)
    assert (rep.counterexample is not None) == (status == "violated")
    d = rep.to_dict()
    assert d["status"] == status and set(d["hypotheses"]) == {str(i) for i in range(len(hyp))}


def test_example1_pattern():
    """Only the relative global stability of the x1-axis fails; the report stays consistent."""
    sc = scenarios.load("example1")
    rep = regression.run_reduction(sc, regression.config(sc), theorem="attractivity")
    assert rep.mode == "global"
    assert rep.outcome("i'") == "fails"
    assert rep.outcome("ii'") == "holds" and rep.outcome("iii'") == "holds"
    assert rep.outcome("conclusion") == "fails"
    assert rep.status == "hypotheses-fail" and rep.consistent is True


@pytest.mark.parametrize("name", ["contracting", "circle", "decoupled", "integrator", "saddle"])
def test_scenario_reductions_consistent(name):
    sc = scenarios.load(name)
    rep = regression.run_reduction(sc, regression.config(sc))
    assert rep.consistent is True, rep.to_dict()


@pytest.mark.parametrize("name", ["contracting", "circle", "decoupled", "integrator"])
def test_relative_property_is_necessary(name):
    """A conclusion that holds forces hypothesis (i): the relative notion is weaker."""
    sc = scenarios.load(name)
    rep = regression.run_reduction(sc, regression.config(sc))
    assert rep.outcome("conclusion") == "holds"
    key = "i'" if "i'" in rep.hypotheses else "i"
    assert rep.outcome(key) == "holds"


def test_stability_only_variant():
    sc = scenarios.load("contracting")
    rep = regression.run_reduction(sc, regression.config(sc), theorem="stability")
    assert rep.theorem == "reduction_stability" and "iii" not in rep.hypotheses
    assert rep.status == "verified"


def test_gamma_outside_O_is_rejected():
    fld = linear_field(-np.eye(2))
    O = coordinate_subspace((1,), 2, ((-1, 1), (-1, 1)))
    with pytest.raises(InputError):
        check_reduction_sas(fld, point_set((0.0, 0.5)), O)


def test_global_mode_needs_box():
    fld = linear_field(-np.eye(2))
    O = coordinate_subspace((1,), 2, ((-1, 1), (-1, 1)))
    with pytest.raises(InputError):
        check_reduction_attractivity(fld, point_set((0.0, 0.0)), O, global_=True)


def test_saddle_hypothesis_ii_fails():
    """O = {x3=0} is not locally stable near the saddle point."""
    sc = scenarios.load("saddle")
    rep = regression.run_reduction(sc, regression.config(sc))
    assert rep.outcome("i") == "holds" and rep.outcome("ii") == "fails"
    assert rep.outcome("conclusion") == "fails"


def test_cascade_rejects_nonzero_g_at_origin():
    with pytest.raises(InputError):
        check_cascade(lambda z: [-z[0] + z[1]], lambda y: [1.0 - y[0]],
                      point_set((0.0,)), n1=1, n2=1, box_x=((-1, 1),), box_y=((-1, 1),))


def test_cascade_product_field():
    fld = cascade_product(lambda z: [-z[0] + z[1]], lambda y: [-2 * y[0]], 1, 1)
    assert fld([1.0, 2.0]).tolist() == [1.0, -4.0]


@pytest.mark.parametrize("seed", range(5))
def test_random_cascades_verified(seed):
    sc = random_cascade(seed)
    rep = regression.run_cascade(sc, regression.config(sc))
    assert rep.consistent is True and rep.status == "verified", rep.to_dict()


def test_unstable_cascade_hypothesis_fails():
    sc = scenarios.load("cascade-unstable")
    rep = regression.run_cascade(sc, regression.config(sc))
    assert rep.outcome("ii") == "fails" and rep.consistent is True


def test_unbounded_cascade_checks_lub():
    sc = scenarios.load("cascade-unbounded")
    rep = regression.run_cascade(sc, regression.config(sc))
    assert rep.outcome("iii") == "holds" and rep.status == "verified"

"""Recompute a scenario's verdict table and compare it with ``expected``.

Keys are grouped by the check that produces them:

- ``passivity``, ``feedback_admissible``
- ``reduction.<hypothesis>``, ``reduction.conclusion``, ``reduction.consistent``
- ``cascade.<hypothesis>``, ``cascade.conclusion``, ``cascade.consistent``
- ``zero_state``, ``V_detect``, ``gamma_detect`` (local) and their
  ``.global`` variants
- ``sufficient_conditions``, ``alternative_condition``, ``lemma4``
- ``theorem5.consistent`` (detectability versus closed-loop stability)

Each group runs at most once per call, with the scenario's ``settings``
and a fixed seed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..core import InputError, _jsonable
from ..detectability import (check_alternative_condition, check_detectability, check_lemma4,
                             check_sufficient_conditions, theorem5_harness)
from ..integrate import DEFAULT, IntegratorConfig
from ..limitsets import omega_limit_estimate
from ..passivity import check_feedback_admissible, check_passivity
from ..reduction import check_cascade, check_reduction_attractivity, check_reduction_sas
from ..stability import StabilityQuery
from .base import Scenario

DETECT_KINDS = ("zero_state", "V_detect", "gamma_detect")
LEMMA4_POINTS = 2000


def query(sc: Scenario, seed=0, samples=None) -> StabilityQuery:
    st = sc.settings
    return StabilityQuery("stable", samples=samples or st.get("samples", 16),
                          horizon=st.get("horizon", 200.0),
                          neighborhood=st.get("neighborhood", 0.1), box=sc.box, seed=seed)


def config(sc: Scenario, cfg: IntegratorConfig = DEFAULT) -> IntegratorConfig:
    if "r_max" in sc.settings:
        cfg = cfg.replace(r_max=sc.settings["r_max"])
    return cfg


def _group(key):
    head = key.split(".")[0]
    return head


def run_reduction(sc: Scenario, cfg=DEFAULT, seed=0, theorem=None):
    st = sc.settings
    if sc.O is None:
        raise InputError(f"scenario {sc.name} has no O set")
    theorem = theorem or st.get("reduction_theorem", "sas")
    q = query(sc, seed)
    glob = bool(st.get("global", False))
    fld = sc.closed_loop()
    rng = np.random.default_rng(seed)
    if theorem == "attractivity":
        return check_reduction_attractivity(fld, sc.Gamma, sc.O, cfg, global_=glob, q=q,
                                            rng=rng)
    if theorem in ("sas", "stability"):
        return check_reduction_sas(fld, sc.Gamma, sc.O, cfg, global_=glob, q=q, rng=rng,
                                   attractivity=theorem == "sas")
    raise InputError("theorem must be 'attractivity', 'sas' or 'stability'")


def run_cascade(sc: Scenario, cfg=DEFAULT, seed=0):
    c = sc.cascade
    if c is None:
        raise InputError(f"scenario {sc.name} is not a cascade")
    return check_cascade(c["fxy"], c["gy"], c["Gamma_x"], cfg, n1=c["n1"], n2=c["n2"],
                         box_x=c["box_x"], box_y=c["box_y"],
                         global_=bool(sc.settings.get("global", False)), q=query(sc, seed),
                         rng=np.random.default_rng(seed))


def lemma4_cloud(sc: Scenario, cfg=DEFAULT, seed=0, starts=4):
    """Open-loop omega-limit points from box samples and from points of O."""
    rng = np.random.default_rng(seed)
    fld = sc.open_loop()
    B = sc.box_array
    P = rng.uniform(B[:, 0], B[:, 1], size=(starts, sc.n))
    if sc.O is not None:
        P = np.vstack([P, np.atleast_2d(sc.O.sample_on(rng, starts))])
    P = P[sc.space.contains(P)]
    T = sc.settings.get("lemma4_T", sc.settings.get("horizon", 200.0))
    clouds = [omega_limit_estimate(fld, x, cfg.replace(T=T)).points for x in P]
    clouds = [c for c in clouds if len(c)]
    if not clouds:
        return np.empty((0, sc.n))
    # equal share per start, so sparse clouds (few large steps) stay represented
    share = max(1, LEMMA4_POINTS // len(clouds))
    return np.vstack([c[rng.choice(len(c), share, replace=False)] if len(c) > share else c
                      for c in clouds])


def _admissibility_points(sc, rng, k=2000):
    B = sc.box_array
    X = rng.uniform(B[:, 0], B[:, 1], size=(k, sc.n))
    if sc.O is not None:
        X = np.vstack([X, np.atleast_2d(sc.O.sample_on(rng, k // 4))])
    return X


def run_group(sc: Scenario, group, cfg=DEFAULT, seed=0):
    """Run one group of checks; return ``(outcomes, report)``."""
    rng = np.random.default_rng(seed)
    st = sc.settings
    out = {}
    if group == "passivity":
        v = check_passivity(sc.ps, 2000, rng=rng, box=sc.box)
        out["passivity"] = v.outcome
        return out, v
    if group == "feedback_admissible":
        v = check_feedback_admissible(sc.ps.sys, sc.feedback, _admissibility_points(sc, rng))
        out["feedback_admissible"] = v.outcome
        return out, v
    if group in ("reduction", "cascade"):
        rep = run_reduction(sc, cfg, seed) if group == "reduction" else run_cascade(sc, cfg, seed)
        for k, v in rep.hypotheses.items():
            out[f"{group}.{k}"] = v.outcome
        out[f"{group}.conclusion"] = rep.outcome("conclusion")
        out[f"{group}.consistent"] = rep.consistent
        out[f"{group}.status"] = rep.status
        return out, rep
    if group in DETECT_KINDS:
        res = {}
        for local in (True, False):
            if not local and "global" not in st.get("detect_modes", ("local", "global")):
                continue
            try:
                v = check_detectability(sc.ps, sc.Gamma, sc.O, group, local=local, cfg=cfg,
                                        box=sc.box, radius=st.get("neighborhood", 0.1),
                                        horizon=st.get("horizon", 200.0), seed=seed,
                                        q=query(sc, seed))
            except InputError as exc:
                out[group if local else f"{group}.global"] = "n/a"
                res["local" if local else "global"] = str(exc)
                continue
            out[group if local else f"{group}.global"] = v.outcome
            res["local" if local else "global"] = v
        return out, res
    if group == "sufficient_conditions":
        v = check_sufficient_conditions(sc.ps, sc.Gamma, cfg.replace(T=st.get("horizon", 200.0)),
                                        box=sc.box, S_prime=sc.S_prime,
                                        jplus_T=st.get("jplus_T", 20.0),
                                        gamma_is_V0=bool(st.get("gamma_is_V0", False)),
                                        seed=seed)
        out[group] = v.outcome
        return out, v
    if group == "alternative_condition":
        v = check_alternative_condition(sc.ps, sc.Gamma, sc.O, sc.V0, cfg,
                                        local=not st.get("global", False), q=query(sc, seed),
                                        box=sc.box, seed=seed)
        out[group] = v.outcome
        return out, v
    if group == "lemma4":
        v = check_lemma4(sc.ps, lemma4_cloud(sc, cfg, seed))
        out[group] = v.outcome
        return out, v
    if group == "theorem5":
        rep = theorem5_harness(sc.ps, sc.feedback, sc.Gamma, sc.O, cfg,
                               global_=bool(st.get("global", False)), q=query(sc, seed),
                               box=sc.box, seed=seed)
        out["theorem5.consistent"] = rep.consistent
        out["theorem5.status"] = rep.status
        return out, rep
    raise InputError(f"unknown check group {group!r}")


@dataclass
class RegressionResult:
    scenario: str
    observed: dict
    expected: dict
    reports: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def mismatches(self):
        return {k: (v, self.observed.get(k)) for k, v in self.expected.items()
                if self.observed.get(k) != v}

    @property
    def ok(self):
        return not self.mismatches

    def to_dict(self):
        return {"scenario": self.scenario, "ok": self.ok, "seconds": self.seconds,
                "expected": self.expected, "observed": self.observed,
                "mismatches": {k: {"expected": a, "observed": b}
                               for k, (a, b) in self.mismatches.items()},
                "reports": {k: _jsonable(v.to_dict() if hasattr(v, "to_dict") else
                                         {kk: (vv.to_dict() if hasattr(vv, "to_dict") else vv)
                                          for kk, vv in v.items()})
                            for k, v in self.reports.items()}}


def run(sc: Scenario, keys=None, cfg: IntegratorConfig = DEFAULT, seed=0) -> RegressionResult:
    """Compute ``keys`` (default: the scenario's expected keys)."""
    keys = list(sc.expected) if keys is None else list(keys)
    cfg = config(sc, cfg)
    t0 = time.perf_counter()
    observed, reports = {}, {}
    for g in dict.fromkeys(_group(k) for k in keys):
        outs, rep = run_group(sc, g, cfg, seed)
        observed.update(outs)
        reports[g] = rep
    expected = {k: sc.expected[k] for k in keys if k in sc.expected}
    return RegressionResult(sc.name, observed, expected, reports,
                            round(time.perf_counter() - t0, 3))

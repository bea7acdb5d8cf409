"""Hypothesis-and-conclusion harness for the reduction principles.

Each harness evaluates the hypotheses of a reduction theorem and its
conclusion independently, by sampling, and records whether the
outcomes are consistent with the theorem: hypotheses holding while the
conclusion fails can only be a numerical artefact, and is reported with
the evidence needed to replay it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ClosedSetSpec, InputError, SmoothField, Verdict, _jsonable, point_set
from .integrate import DEFAULT, IntegratorConfig, integrate
from .sampling import near_set
from .stability import (StabilityQuery, check_attraction_near, check_bounded,
                        check_convergence_from, check_local_stability_near, check_lub,
                        check_property)

STATUSES = ("verified", "hypotheses-fail", "violated", "inconclusive")


@dataclass
class ReductionReport:
    """Per-hypothesis verdicts, the conclusion, and their consistency.

    ``consistent`` is ``True`` when the theorem's implication is
    respected (including vacuously, when a hypothesis fails), ``False``
    when every hypothesis holds but the conclusion fails, and ``None``
    when an inconclusive verdict prevents a decision.
    """

    theorem: str
    mode: str
    hypotheses: dict
    conclusion: Optional[Verdict]
    consistent: Optional[bool] = None
    status: str = "inconclusive"
    counterexample: Optional[dict] = None
    notes: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def outcome(self, key):
        v = self.conclusion if key == "conclusion" else self.hypotheses.get(key)
        return None if v is None else v.outcome

    def to_dict(self):
        return {"theorem": self.theorem, "mode": self.mode,
                "hypotheses": {k: v.to_dict() for k, v in self.hypotheses.items()},
                "conclusion": None if self.conclusion is None else self.conclusion.to_dict(),
                "consistent": self.consistent, "status": self.status,
                "counterexample": _jsonable(self.counterexample),
                "notes": list(self.notes), "params": _jsonable(self.params)}


def assess(theorem, mode, hypotheses, conclusion, params=None, notes=()):
    """Assemble a report and decide the implication hypotheses => conclusion."""
    hyp = dict(hypotheses)
    outs = [v.outcome for v in hyp.values()]
    notes = list(notes)
    ce = None
    if any(o == "fails" for o in outs):
        status, consistent = "hypotheses-fail", True
    elif any(o == "inconclusive" for o in outs):
        status, consistent = "inconclusive", None
    elif conclusion is None or conclusion.outcome == "inconclusive":
        status, consistent = "inconclusive", None
    elif conclusion.holds:
        status, consistent = "verified", True
    else:
        status, consistent = "violated", False
        ce = {"conclusion_witness": conclusion.witness,
              "hypotheses": {k: v.params for k, v in hyp.items()}}
        notes.append("every hypothesis holds but the conclusion fails: numerical artefact "
                     "or insufficient sampling; replay the witness")
    return ReductionReport(theorem, mode, hyp, conclusion, consistent, status, ce,
                           notes, dict(params or {}))


def _query(prop, q: Optional[StabilityQuery], default_box, **kw):
    base = q or StabilityQuery("stable")
    if default_box is not None and base.box is None:
        kw.setdefault("box", tuple(tuple(b) for b in default_box))
    return base.with_prop(prop, **kw)


def _check_inclusion(fld, Gamma, O, rng, k=16, tol=1e-7):
    P = np.atleast_2d(Gamma.sample_on(rng, k))
    P = P[fld.space.contains(P)]
    d = O.dist(P) if len(P) else np.zeros(0)
    if len(d) and d.max() > max(tol, O.membership_tol):
        raise InputError(f"{Gamma.name} is not contained in {O.name} "
                         f"(distance {d.max():.3g})")


def bounded_with_relative_capture(fld, Gamma, O, q: StabilityQuery,
                                  cfg: IntegratorConfig = DEFAULT, rng=None, capture=0.05,
                                  per_traj=2) -> Verdict:
    """Solutions near Gamma are bounded, and the points where their closure
    meets O lie in the domain of attraction of Gamma relative to O.

    Tail points of each sampled solution that come within ``capture`` of
    O are projected onto O and integrated; every such solution must
    converge to Gamma.
    """
    prop = "bounded_and_captured"
    rng = np.random.default_rng(q.seed) if rng is None else rng
    X0 = near_set(rng, Gamma, q.neighborhood, q.samples, space=fld.space)
    params = dict(q.params(), capture=capture)
    if len(X0) == 0:
        return Verdict(prop, "inconclusive", params=params, notes=["no samples"])
    hits = []
    run_cfg = cfg.replace(T=q.horizon)
    for x0 in X0:
        tr = integrate(fld, x0, run_cfg, on_nan="flag")
        if tr.status != "ok":
            return Verdict(prop, "fails", params=params,
                           witness={"x0": x0, "time": float(tr.times[-1]),
                                    "distance": float(np.linalg.norm(tr.states[-1])),
                                    "status": tr.status, "violation": "unbounded"})
        nrm = np.linalg.norm(tr.states, axis=1)
        half = tr.times >= 0.5 * tr.times[-1]
        if nrm[half].max() > 2.0 * max(nrm[~half].max(initial=0.0), 1.0):
            return Verdict(prop, "inconclusive", params=params,
                           notes=["norm still growing at the horizon"],
                           details={"x0": x0})
        tail = tr.states[tr.times >= 0.8 * tr.times[-1]]
        near = tail[O.dist(tail) <= capture]
        if len(near) and O.project is not None:
            pick = near[rng.choice(len(near), size=min(per_traj, len(near)), replace=False)]
            hits.append(O.project(pick))
    if not hits:
        return Verdict(prop, "inconclusive", params=params,
                       notes=["no solution came within the capture band of O"])
    P = np.vstack(hits)
    P = P[fld.space.contains(P)]
    v = check_convergence_from(fld, Gamma, P, q, cfg, prop=prop)
    v.params.update(capture=capture)
    return v


def check_reduction_attractivity(fld: SmoothField, Gamma: ClosedSetSpec, O: ClosedSetSpec,
                                 cfg: IntegratorConfig = DEFAULT, global_=False,
                                 q: Optional[StabilityQuery] = None, box=None,
                                 rng=None) -> ReductionReport:
    """Hypotheses and conclusion of the reduction principle for semi-attractivity.

    Local mode: (i) Gamma semi-asymptotically stable relative to O,
    (ii) O locally semi-attractive near Gamma, (iii) bounded solutions
    near Gamma whose closure meets O inside the relative domain of
    attraction. Global mode: (i') globally semi-asymptotically stable
    relative to O, (ii') O a global attractor, (iii') all solutions
    bounded (on ``box``).
    """
    seed = (q.seed if q is not None else 0)
    rng = np.random.default_rng(seed) if rng is None else rng
    _check_inclusion(fld, Gamma, O, rng)
    if global_:
        if box is None and (q is None or q.box is None):
            raise InputError("global mode needs a sampling box")
        qi = _query("globally_semi_asymptotically_stable", q, box, relative_to=O)
        hyp = {"i'": check_property(fld, Gamma, qi, cfg, rng=rng),
               "ii'": check_attraction_near(fld, Gamma, O, _query("global_attractor", q, box),
                                            cfg, rng=rng, global_=True),
               "iii'": check_bounded(fld, qi.box, cfg.replace(T=qi.horizon),
                                     samples=qi.samples, rng=rng)}
        concl = check_property(fld, Gamma, _query("global_attractor", q, box), cfg, rng=rng)
    else:
        qi = _query("semi_asymptotically_stable", q, box, relative_to=O)
        hyp = {"i": check_property(fld, Gamma, qi, cfg, rng=rng),
               "ii": check_attraction_near(fld, Gamma, O, _query("semi_attractor", q, box),
                                           cfg, rng=rng),
               "iii": bounded_with_relative_capture(fld, Gamma, O,
                                                    _query("semi_attractor", q, box,
                                                           relative_to=O), cfg, rng=rng)}
        concl = check_property(fld, Gamma, _query("semi_attractor", q, box), cfg, rng=rng)
    return assess("reduction_attractivity", "global" if global_ else "local", hyp, concl,
                  params={"Gamma": Gamma.name, "O": O.name, "T": qi.horizon,
                          "seed": qi.seed})


def check_reduction_sas(fld: SmoothField, Gamma: ClosedSetSpec, O: ClosedSetSpec,
                        cfg: IntegratorConfig = DEFAULT, global_=False,
                        q: Optional[StabilityQuery] = None, box=None, rng=None,
                        attractivity=True) -> ReductionReport:
    """Hypotheses and conclusion of the reduction principle for semi-asymptotic stability.

    (i) Gamma [globally] semi-asymptotically stable relative to O,
    (ii) O locally stable near Gamma, (iii) O locally semi-attractive
    near Gamma [a global attractor], (iv) local uniform boundedness when
    Gamma is unbounded, (v) [all solutions bounded]. With
    ``attractivity=False`` this is the stability-only variant: (i), (ii)
    and (iv) against the conclusion "Gamma is stable".
    """
    seed = (q.seed if q is not None else 0)
    rng = np.random.default_rng(seed) if rng is None else rng
    _check_inclusion(fld, Gamma, O, rng)
    if global_ and box is None and (q is None or q.box is None):
        raise InputError("global mode needs a sampling box")
    rel = "globally_semi_asymptotically_stable" if global_ else "semi_asymptotically_stable"
    qi = _query(rel, q, box, relative_to=O)
    run_cfg = cfg.replace(T=qi.horizon)
    hyp = {"i": check_property(fld, Gamma, qi, cfg, rng=rng),
           "ii": check_local_stability_near(fld, Gamma, O, run_cfg, rng=rng,
                                            samples=max(8, qi.samples // 2),
                                            delta_floor=qi.delta_floor)}
    if attractivity:
        qa = _query("global_attractor" if global_ else "semi_attractor", q, box)
        hyp["iii"] = check_attraction_near(fld, Gamma, O, qa, cfg, rng=rng, global_=global_)
    if not Gamma.bounded:
        hyp["iv"] = check_lub(fld, Gamma, run_cfg, rng=rng)
    if attractivity and global_:
        hyp["v"] = check_bounded(fld, qi.box, run_cfg, samples=qi.samples, rng=rng)
    if attractivity:
        concl = check_property(fld, Gamma, _query(
            "globally_semi_asymptotically_stable" if global_ else "semi_asymptotically_stable",
            q, box), cfg, rng=rng)
        name = "reduction_sas"
    else:
        concl = check_property(fld, Gamma, _query("stable", q, box), cfg, rng=rng)
        name = "reduction_stability"
    return assess(name, "global" if global_ else "local", hyp, concl,
                  params={"Gamma": Gamma.name, "O": O.name, "T": qi.horizon,
                          "seed": qi.seed})


def _fn(obj):
    return obj.fn if hasattr(obj, "fn") else obj


def cascade_product(fxy, gy, n1, n2, name="cascade"):
    """Field of x' = f(x, y), y' = g(y) on R^(n1+n2)."""
    f, g = _fn(fxy), _fn(gy)

    def fn(z):
        return list(f(z)) + list(g([z[n1 + j] for j in range(n2)]))
    return SmoothField(fn, n1 + n2, name=name)


def _lift(Gx: ClosedSetSpec, n1, n2):
    """{(x, y): x in Gamma_x, y = 0} with the product distance."""
    def dist(Z):
        Z = np.asarray(Z, dtype=float)
        dx = Gx.dist(Z[..., :n1])
        dy = np.linalg.norm(Z[..., n1:], axis=-1)
        return np.hypot(dx, dy)

    def sample_on(rng, k):
        X = np.atleast_2d(Gx.sample_on(rng, k))
        return np.hstack([X, np.zeros((len(X), n2))])

    project = None
    if Gx.project is not None:
        def project(Z):
            Z = np.array(Z, dtype=float, copy=True)
            Z[..., :n1] = Gx.project(Z[..., :n1])
            Z[..., n1:] = 0.0
            return Z
    return ClosedSetSpec(f"{Gx.name} x {{y=0}}", n1 + n2, dist, sample_on, project,
                         bounded=Gx.bounded)


def _y_zero(n1, n2, box):
    from .core import coordinate_subspace
    return coordinate_subspace(tuple(range(n1, n1 + n2)), n1 + n2, box, name="{y=0}")


def check_cascade(fxy, gy, Gamma_x: ClosedSetSpec, cfg: IntegratorConfig = DEFAULT,
                  n1=None, n2=None, box_x=None, box_y=None, global_=False,
                  q: Optional[StabilityQuery] = None, rng=None, tol=1e-9) -> ReductionReport:
    """Cascade corollary: x' = f(x, y), y' = g(y), Gamma~ = Gamma_x x {0}.

    (i) Gamma_x [globally] semi-asymptotically stable for x' = f(x, 0),
    (ii) y = 0 [globally] asymptotically stable for y' = g(y),
    (iii) local uniform boundedness near Gamma~ when Gamma_x is
    unbounded, (iv) [all solutions bounded]. The conclusion is checked on
    the product system.
    """
    n1 = Gamma_x.n if n1 is None else int(n1)
    if n2 is None or box_x is None or box_y is None:
        raise InputError("n2, box_x and box_y are required")
    n2 = int(n2)
    f, g = _fn(fxy), _fn(gy)
    g0 = np.array([float(v) for v in g([0.0] * n2)])
    if np.max(np.abs(g0)) > tol:
        raise InputError(f"g(0) = {g0.tolist()} is not zero")
    seed = (q.seed if q is not None else 0)
    rng = np.random.default_rng(seed) if rng is None else rng
    box = tuple(tuple(b) for b in box_x) + tuple(tuple(b) for b in box_y)

    def fx0(x):
        return list(f(list(x[i] for i in range(n1)) + [0.0 * x[0]] * n2))

    sub_x = SmoothField(fx0, n1, name="f(x,0)")
    sub_y = SmoothField(g, n2, name="g(y)")
    prod = cascade_product(f, g, n1, n2)
    G = _lift(Gamma_x, n1, n2)
    O = _y_zero(n1, n2, box)
    mode = "global" if global_ else "local"
    sas = "globally_semi_asymptotically_stable" if global_ else "semi_asymptotically_stable"
    hyp = {"i": check_property(sub_x, Gamma_x, _query(sas, q, None, box=tuple(map(tuple, box_x))),
                               cfg, rng=rng),
           "ii": check_property(sub_y, point_set(np.zeros(n2), name="{y=0}"),
                                _query(sas, q, None, box=tuple(map(tuple, box_y))), cfg, rng=rng)}
    run_cfg = cfg.replace(T=(q.horizon if q is not None else 200.0))
    if not Gamma_x.bounded:
        hyp["iii"] = check_lub(prod, G, run_cfg, rng=rng)
    if global_:
        hyp["iv"] = check_bounded(prod, box, run_cfg,
                                  samples=(q.samples if q is not None else 64), rng=rng)
    concl = check_property(prod, G, _query(sas, q, None, box=box), cfg, rng=rng)
    rep = assess("cascade", mode, hyp, concl,
                 params={"Gamma_x": Gamma_x.name, "n1": n1, "n2": n2, "O": O.name})
    return rep

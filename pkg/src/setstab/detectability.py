"""The unobservable set O, detectability notions and their sufficient conditions.

Zero-state and V-detectability are decided on their own route (state
norm, respectively storage, along open-loop solutions from points of
O), while Gamma-detectability delegates to the relative stability
checks. Keeping the routes separate is what makes the equivalence
cross-checks between them meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calculus import RESIDUAL_BAND, s_prime_residual, s_residual
from .core import (ClosedSetSpec, InputError, PassiveSystem, Verdict, as_points,
                   close_loop, combine, zero_feedback)
from .integrate import DEFAULT, IntegratorConfig, integrate, integrate_until
from .limitsets import RHO, omega_limit_estimate, prolongational_limit_estimate
from .passivity import check_feedback_admissible
from .reduction import assess
from .sampling import in_box, near_set
from .stability import StabilityQuery, check_bounded, check_lub, check_property

KINDS = ("zero_state", "V_detect", "gamma_detect")
H_BAND = 1e-6


def open_loop(ps: PassiveSystem):
    return close_loop(ps, zero_feedback(ps.sys.m))


# --------------------------------------------------------------------------
# root refinement
# --------------------------------------------------------------------------

def gauss_newton(res, x, iters=50, fd=1e-7, tol=1e-14, damping=1e-8):
    """Damped Gauss-Newton on ||res(x)||^2 with forward-difference Jacobians.

    Steps are halved until the residual norm decreases; returns the
    last point and its residual norm.
    """
    x = np.asarray(x, dtype=float).copy()
    r = np.asarray(res(x), dtype=float)
    nr = float(np.linalg.norm(r))
    for _ in range(iters):
        if nr <= tol:
            break
        J = np.empty((r.size, x.size))
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = fd * max(1.0, abs(x[j]))
            J[:, j] = (np.asarray(res(x + e), dtype=float) - r) / e[j]
        A = J.T @ J
        step = np.linalg.solve(A + damping * (np.trace(A) / x.size + 1e-30) * np.eye(x.size),
                               -J.T @ r)
        lam = 1.0
        while lam > 1e-6:
            xn = x + lam * step
            rn = np.asarray(res(xn), dtype=float)
            if np.all(np.isfinite(rn)) and np.linalg.norm(rn) < nr:
                break
            lam /= 2.0
        else:
            break
        x, r, nr = xn, rn, float(np.linalg.norm(rn))
    return x, nr


# --------------------------------------------------------------------------
# O
# --------------------------------------------------------------------------

def probe_O_membership(sys, x, cfg: IntegratorConfig = DEFAULT, band=H_BAND):
    """Classify ``x`` as in O, out of O, or undecided, from |h| along the open loop.

    ``out`` when ``max |h|`` exceeds ``band`` (or the solution escapes),
    ``in_O`` when it stays below ``band / 10``, ``inconclusive`` in
    between. Finite horizon: ``in_O`` means "indistinguishable from O
    up to ``cfg.T``".
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,) or not np.all(np.isfinite(x)):
        raise InputError("probe point must be a finite state")
    fld = close_loop(sys, zero_feedback(sys.m))
    tr = integrate(fld, x, cfg, on_nan="flag")
    H = np.abs(np.atleast_2d(sys.output(tr.states)).reshape(len(tr.times), sys.m))
    hmax = float(H.max())
    if tr.status != "ok":
        return {"result": "out", "max_h": hmax, "escaped": True, "status": tr.status}
    if hmax > band:
        i = int(np.argmax(H.max(axis=1)))
        return {"result": "out", "max_h": hmax, "escaped": False,
                "time": float(tr.times[i])}
    if hmax <= band / 10:
        return {"result": "in_O", "max_h": hmax, "escaped": False}
    return {"result": "inconclusive", "max_h": hmax, "escaped": False}


@dataclass(frozen=True)
class OSetSpec:
    """O given explicitly or by simulation probes.

    Probe mode draws box points, moves them onto ``h = 0`` by
    Gauss-Newton and keeps those :func:`probe_O_membership` accepts; it
    is a finite-horizon approximation of the maximal invariant set.
    """

    mode: str
    spec: Optional[ClosedSetSpec] = None
    band: float = H_BAND

    def __post_init__(self):
        if self.mode not in ("explicit", "probe"):
            raise InputError("O mode must be 'explicit' or 'probe'")
        if self.mode == "explicit" and self.spec is None:
            raise InputError("explicit O needs a set specification")

    @classmethod
    def explicit(cls, spec):
        return cls("explicit", spec)

    @classmethod
    def probe(cls, band=H_BAND):
        return cls("probe", None, band)

    @property
    def name(self):
        return self.spec.name if self.spec is not None else "O (probed)"

    def sample(self, sys, rng, k, near=None, radius=None, box=None,
               cfg: IntegratorConfig = DEFAULT):
        """Up to ``k`` points of O, near ``near`` within ``radius`` or in ``box``."""
        if self.mode == "explicit":
            if near is not None:
                return near_set(rng, near, radius, k, relative=self.spec, space=sys.space)
            return in_box(rng, box, k, relative=self.spec, space=sys.space)
        if box is None and near is None:
            raise InputError("probe sampling needs a box or a base set")
        out = []
        for _ in range(8):
            if near is not None:
                C = near.sample_near(rng, radius, 4 * k)
            else:
                C = in_box(rng, box, 4 * k)
            for c in C:
                x, nr = gauss_newton(lambda z: np.atleast_1d(sys.output(z)), c)
                if nr > self.band / 10 or not bool(sys.space.contains(x)):
                    continue
                if near is not None and float(near.dist(x)) > radius:
                    continue
                if probe_O_membership(sys, x, cfg, self.band)["result"] == "in_O":
                    out.append(x)
                if len(out) >= k:
                    return np.array(out)
        return np.array(out).reshape(-1, sys.n)


def _as_O(O):
    return O if isinstance(O, OSetSpec) else OSetSpec.explicit(O)


# --------------------------------------------------------------------------
# detectability
# --------------------------------------------------------------------------

def _decay_verdict(prop, fld, X0, quantity, sys, cfg, band, cap_factor, params, h_band):
    """Does ``quantity(states)`` decay below ``band`` along each solution?"""
    fail, unsure, skipped = None, [], 0

    def stalled(v, t, ratio=0.9):
        late = t >= 0.75 * t[-1]
        mid = (t >= 0.5 * t[-1]) & ~late
        return bool(mid.any()) and v[late].max() >= ratio * v[mid].max()

    def need(tr):
        v, t = quantity(tr.states), tr.times
        if float(np.max(v[t >= 0.9 * t[-1]])) <= band:
            return False
        # a plateau that survived several doublings will not decay later
        return not (t[-1] >= 16 * cfg.T and stalled(v, t, 0.999))

    for x0 in X0:
        tr = integrate_until(fld, x0, cfg, need_more=need, cap_factor=cap_factor)
        H = np.abs(np.atleast_2d(sys.output(tr.states)))
        if tr.status != "ok" or float(H.max()) > h_band:
            # not a solution with identically zero output: outside the premise
            skipped += 1
            continue
        v = quantity(tr.states)
        t = tr.times
        late = t >= 0.75 * t[-1]
        if float(v[t >= 0.9 * t[-1]].max()) <= band:
            continue
        if stalled(v, t):
            i = int(np.flatnonzero(late)[0] + np.argmax(v[late]))
            w = {"x0": x0, "time": float(t[i]), "distance": float(v[i])}
            if fail is None or w["distance"] > fail["distance"]:
                fail = w
        else:
            unsure.append(x0)
    notes = []
    if skipped:
        notes.append(f"{skipped} sampled points left h^-1(0) and were skipped")
    params = dict(params, band=band, points=len(X0) - skipped)
    if fail is not None:
        return Verdict(prop, "fails", witness=fail, params=params, notes=notes)
    if unsure or skipped == len(X0):
        return Verdict(prop, "inconclusive", params=params,
                       notes=notes + [f"{len(unsure)} solutions still decaying at the cap"])
    return Verdict(prop, "holds", params=params, notes=notes)


def check_detectability(ps: PassiveSystem, Gamma: ClosedSetSpec, O, kind="gamma_detect",
                        local=True, cfg: IntegratorConfig = DEFAULT, samples=32, radius=0.1,
                        box=None, band=1e-3, v_band=1e-6, horizon=200.0, cap_factor=4096,
                        seed=0, rng=None, q: Optional[StabilityQuery] = None,
                        tol=1e-9) -> Verdict:
    """Zero-state, V- or Gamma-detectability of the open loop.

    ``local`` samples O within ``radius`` of Gamma; otherwise O is
    sampled over ``box`` and the verdict is relative to that box.
    """
    if kind not in KINDS:
        raise InputError(f"kind must be one of {KINDS}")
    if not local and box is None:
        raise InputError("global detectability needs a sampling box")
    rng = np.random.default_rng(seed) if rng is None else rng
    O = _as_O(O)
    sys = ps.sys
    fld = open_loop(ps)
    cfg = cfg.replace(T=horizon)
    params = {"kind": kind, "local": local, "O": O.name, "O_mode": O.mode,
              "samples": samples, "radius": radius, "T": horizon, "seed": seed,
              "box": None if box is None else [list(b) for b in box]}
    if not local:
        params["note"] = "global verdict relative to the sampling box"
    if kind == "gamma_detect":
        if O.spec is None:
            raise InputError("gamma_detect needs an explicit O")
        prop = "semi_asymptotically_stable" if local else "globally_semi_asymptotically_stable"
        base = q or StabilityQuery("stable", samples=samples, horizon=horizon,
                                   neighborhood=radius, cap_factor=cap_factor, seed=seed)
        qq = base.with_prop(prop, relative_to=O.spec,
                            box=tuple(map(tuple, box)) if box is not None else base.box)
        v = check_property(fld, Gamma, qq, cfg, rng=rng)
        v.prop = "gamma_detect"
        v.params.update(params)
        return v
    X0 = O.sample(sys, rng, samples, near=Gamma if local else None, radius=radius,
                  box=box, cfg=cfg)
    if len(X0) == 0:
        return Verdict(kind, "inconclusive", params=params, notes=["no points of O sampled"])
    if kind == "zero_state":
        if float(Gamma.dist(np.zeros(sys.n))) > tol or Gamma.sample_on(rng, 4).std() > tol:
            raise InputError("zero-state detectability concerns Gamma = {0}")
        return _decay_verdict(kind, fld, X0, lambda X: np.linalg.norm(X, axis=-1), sys, cfg,
                              band, cap_factor, params, O.band * 10)
    return _decay_verdict(kind, fld, X0, lambda X: ps.V.batch(X), sys, cfg, v_band,
                          cap_factor, params, O.band * 10)


# --------------------------------------------------------------------------
# S' and sufficient conditions
# --------------------------------------------------------------------------

def s_prime_norm(sys, r, X):
    X = as_points(X, sys.n)
    return np.array([float(np.max(np.abs(s_prime_residual(sys, r, x)))) for x in X])


def sample_s_prime(sys, r, box, rng, k, band=RESIDUAL_BAND, oversample=20, iters=50):
    """Points of S' by rejection over ``box`` plus Gauss-Newton refinement.

    Candidates are ranked by residual norm; the best are refined and
    kept when the refined residual is within ``band`` and the point is
    inside the box.
    """
    box = np.asarray(box, dtype=float)
    C = in_box(rng, box, oversample * k, space=sys.space)
    norms = s_prime_norm(sys, r, C)
    out = [c for c, v in zip(C, norms) if v <= band]
    for c in C[np.argsort(norms)][: 4 * k]:
        if len(out) >= k:
            break
        x, _ = gauss_newton(lambda z: s_prime_residual(sys, r, z), c, iters=iters)
        inside = np.all((x >= box[:, 0]) & (x <= box[:, 1]))
        if inside and bool(sys.space.contains(x)) and s_prime_norm(sys, r, x)[0] <= band:
            out.append(x)
    return np.array(out[:k]).reshape(-1, sys.n)


def s_prime_set(sys, r, box, band=RESIDUAL_BAND):
    """S' as a set specification: membership by residual, projection by Gauss-Newton.

    The "distance" is the residual norm, which is only a membership
    proxy; it is used for inclusion tests at the residual band.
    """
    def dist(X):
        X = np.asarray(X, dtype=float)
        return s_prime_norm(sys, r, X.reshape(-1, sys.n)).reshape(X.shape[:-1])

    def sample_on(rng, k):
        return sample_s_prime(sys, r, box, rng, k, band)

    def project(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([gauss_newton(lambda z: s_prime_residual(sys, r, z), x)[0]
                         for x in X])

    return ClosedSetSpec("S' (residual)", sys.n, dist, sample_on, project,
                         membership_tol=band, space=sys.space)


def check_sufficient_conditions(ps: PassiveSystem, Gamma: ClosedSetSpec,
                                cfg: IntegratorConfig = DEFAULT, box=None, S_prime=None,
                                samples=6, rho=RHO, jplus_T=20.0, K=6, per_level=8,
                                gamma_is_V0=False, v_band=1e-6, seed=0, rng=None,
                                band=1e-6) -> Verdict:
    """Boundedness on S', local uniform boundedness, and S' n J+(S', S') in Gamma.

    With ``gamma_is_V0`` the inclusion S' n L+(S') in V^-1(0) is tested
    instead. ``S_prime`` may be supplied exactly; otherwise it is sampled
    from the residual. A J+ point counts as lying in S' when it is
    within ``rho`` of it, and must then be within ``2 rho`` of Gamma.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    sys = ps.sys
    fld = open_loop(ps)
    if S_prime is None:
        if box is None:
            raise InputError("sampling S' needs a box")
        S_prime = s_prime_set(sys, ps.r, box, band)
    params = {"samples": samples, "rho": rho, "jplus_T": jplus_T, "K": K,
              "per_level": per_level, "S_prime": S_prime.name, "r": ps.r, "seed": seed,
              "variant": "L+ in V^-1(0)" if gamma_is_V0 else "J+ in Gamma"}
    P = np.atleast_2d(S_prime.sample_on(rng, samples))
    G = np.atleast_2d(Gamma.sample_on(rng, 2))
    P = np.vstack([G, P]) if len(P) else G
    P = P[sys.space.contains(P) & (S_prime.dist(P) <= max(band, S_prime.membership_tol))]
    if len(P) == 0:
        return Verdict("sufficient_conditions", "inconclusive", params=params,
                       notes=["no points of S' found"])
    parts = []
    # bounded solutions among those that remain on S'
    bad = None
    for x in P:
        tr = integrate(fld, x, cfg, on_nan="flag")
        if tr.status != "ok" and float(np.max(S_prime.dist(tr.states))) <= rho:
            bad = {"x0": x, "time": float(tr.times[-1]),
                   "distance": float(np.linalg.norm(tr.states[-1])), "status": tr.status}
            break
    parts.append(Verdict("bounded_on_S_prime", "fails", witness=bad) if bad is not None
                 else Verdict("bounded_on_S_prime", "holds"))
    parts.append(check_lub(fld, Gamma, cfg, rng=rng, points=2, samples=8, levels=6))
    worst = None
    jcfg = cfg.replace(T=jplus_T)
    clouds = 0
    for x in P:
        if gamma_is_V0:
            est = omega_limit_estimate(fld, x, cfg, rho=rho)
            pts = est.points
            if len(pts) == 0:
                continue
            clouds += 1
            on = S_prime.dist(pts) <= rho
            val = ps.V.batch(pts)
            badm = on & (val > v_band)
            if badm.any():
                i = int(np.argmax(np.where(badm, val, -np.inf)))
                w = {"x0": x, "time": float(est.sources[i][1]), "distance": float(val[i]),
                     "point": pts[i]}
                if worst is None or w["distance"] > worst["distance"]:
                    worst = w
            continue
        est = prolongational_limit_estimate(fld, x, S_prime, jcfg, K=K, per_level=per_level,
                                            rho=rho, rng=rng, tol=max(band, 1e-7))
        if est.empty:
            continue
        clouds += 1
        pts = est.points
        on = S_prime.dist(pts) <= rho
        dG = Gamma.dist(pts)
        badm = on & (dG > 2 * rho)
        if badm.any():
            i = int(np.argmax(np.where(badm, dG, -np.inf)))
            ic, t = est.sources[i]
            w = {"x0": est.initial_conditions[int(ic)], "time": float(t),
                 "distance": float(dG[i]), "point": pts[i], "base": x}
            if worst is None or w["distance"] > worst["distance"]:
                worst = w
    incl = "S'_L+_in_V0" if gamma_is_V0 else "S'_J+_in_Gamma"
    if worst is not None:
        parts.append(Verdict(incl, "fails", witness=worst))
    elif clouds == 0:
        parts.append(Verdict(incl, "inconclusive", notes=["every limit-set estimate empty"]))
    else:
        parts.append(Verdict(incl, "holds", details={"clouds": clouds}))
    v = combine("sufficient_conditions", parts, params=params)
    if v.holds:
        v.notes.append("finite J+ ladder and finite sample of S': supports, does not prove")
    return v


def check_lemma4(ps: PassiveSystem, limit_points, band=RESIDUAL_BAND) -> Verdict:
    """S and S' residuals vanish together at estimated limit points."""
    P = np.asarray(limit_points, dtype=float)
    params = {"band": band}
    if P.size == 0:
        return Verdict("lemma4", "inconclusive", params=params, notes=["empty point set"])
    P = as_points(P, ps.sys.n)
    rs = np.array([float(np.max(np.abs(s_residual(ps, x)))) for x in P])
    rp = s_prime_norm(ps.sys, ps.r, P)
    mismatch = (rs <= band) != (rp <= band)
    details = {"points": len(P), "in_S": int((rs <= band).sum()),
               "in_S_prime": int((rp <= band).sum())}
    if mismatch.any():
        i = int(np.flatnonzero(mismatch)[0])
        return Verdict("lemma4", "fails", params=params, details=details,
                       witness={"x0": P[i], "time": 0.0, "distance": float(abs(rs[i] - rp[i])),
                                "s_residual": float(rs[i]), "s_prime_residual": float(rp[i])})
    return Verdict("lemma4", "holds", params=params, details=details)


def check_alternative_condition(ps: PassiveSystem, Gamma, O, V0, cfg: IntegratorConfig = DEFAULT,
                                local=True, q: Optional[StabilityQuery] = None, box=None,
                                seed=0, rng=None) -> Verdict:
    """Gamma stable relative to V^-1(0) and [globally] semi-attractive relative to O."""
    if V0 is None:
        raise InputError("the alternative condition needs V^-1(0)")
    rng = np.random.default_rng(seed) if rng is None else rng
    O = _as_O(O)
    if O.spec is None:
        raise InputError("the alternative condition needs an explicit O")
    fld = open_loop(ps)
    base = q or StabilityQuery("stable", seed=seed)
    bx = tuple(map(tuple, box)) if box is not None else base.box
    st = check_property(fld, Gamma, base.with_prop("stable", relative_to=V0, box=bx), cfg,
                        rng=rng)
    at = check_property(fld, Gamma, base.with_prop(
        "semi_attractor" if local else "global_attractor", relative_to=O.spec, box=bx),
        cfg, rng=rng)
    return combine("alternative_condition", [st, at],
                   params={"V0": V0.name, "O": O.name, "local": local})


def theorem5_harness(ps: PassiveSystem, fb, Gamma, O, cfg: IntegratorConfig = DEFAULT,
                     global_=False, q: Optional[StabilityQuery] = None, box=None, seed=0,
                     rng=None, admissibility_samples=2000):
    """Gamma-detectability of the open loop versus closed-loop (semi-)asymptotic stability.

    Side conditions (local uniform boundedness for unbounded Gamma,
    boundedness for the global claim) are checked on the closed loop;
    when they hold, the two verdicts must agree.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    O = _as_O(O)
    sys = ps.sys
    base = q or StabilityQuery("stable", seed=seed)
    bx = tuple(map(tuple, box)) if box is not None else base.box
    if bx is None:
        raise InputError("the detectability-stability comparison needs a sampling box")
    Xa = in_box(rng, bx, admissibility_samples, space=sys.space)
    if O.spec is not None:
        Xa = np.vstack([Xa, np.atleast_2d(O.spec.sample_on(rng, admissibility_samples // 4))])
    adm = check_feedback_admissible(sys, fb, Xa)
    if adm.fails:
        raise InputError(f"feedback {fb.name} is not passivity-based: {adm.witness}")
    closed = close_loop(ps, fb)
    run_cfg = cfg.replace(T=base.horizon)
    side = {}
    if not Gamma.bounded:
        side["lub"] = check_lub(closed, Gamma, run_cfg, rng=rng)
    if global_:
        side["bounded"] = check_bounded(closed, bx, run_cfg, samples=base.samples, rng=rng)
    det = check_detectability(ps, Gamma, O, "gamma_detect", local=not global_, cfg=cfg,
                              samples=base.samples, radius=base.neighborhood,
                              box=bx, horizon=base.horizon, cap_factor=base.cap_factor,
                              seed=seed, rng=rng, q=base)
    prop = "globally_semi_asymptotically_stable" if global_ else "semi_asymptotically_stable"
    concl = check_property(closed, Gamma, base.with_prop(prop, box=bx), cfg, rng=rng)
    hyp = dict(side, detectable=det)
    rep = assess("theorem5", "global" if global_ else "local", hyp, concl,
                 params={"feedback": fb.name, "Gamma": Gamma.name, "O": O.name})
    # the theorem is an equivalence once the side conditions hold
    side_out = [v.outcome for v in side.values()]
    if "fails" in side_out:
        rep.status, rep.consistent = "hypotheses-fail", True
    elif "inconclusive" in side_out or "inconclusive" in (det.outcome, concl.outcome):
        rep.status, rep.consistent = "inconclusive", None
    elif det.outcome == concl.outcome:
        rep.status, rep.consistent = "verified", True
        rep.counterexample = None
    else:
        rep.status, rep.consistent = "violated", False
        rep.counterexample = {"detectable": det.to_dict(), "closed_loop": concl.to_dict()}
        if not rep.notes:
            rep.notes.append("detectability and closed-loop stability disagree")
    return rep

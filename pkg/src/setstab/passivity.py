"""Sampling checks of the passivity identities and of feedback admissibility."""
from __future__ import annotations

import numpy as np

from .calculus import lie_batch
from .core import ControlAffineSystem, InputError, PassiveSystem, Trajectory, Verdict, as_points

PASSIVITY_TOL = 1e-9
MONOTONE_TOL = 1e-8


def _samples(samples, n, rng=None, box=None):
    if isinstance(samples, (int, np.integer)):
        if box is None:
            raise InputError("a sample count needs a box")
        rng = np.random.default_rng(0) if rng is None else rng
        box = np.asarray(box, dtype=float)
        return rng.uniform(box[:, 0], box[:, 1], size=(int(samples), n))
    return as_points(samples, n)


def passivity_residuals(ps: PassiveSystem, X):
    """Per-point ``L_f V``, ``max_i |L_{g_i} V - h_i|`` and ``V``."""
    sys = ps.sys
    X = as_points(X, sys.n)
    LfV = lie_batch(sys.f, ps.V, X)
    gap = np.zeros(len(X))
    for gi, hi in zip(sys.g, sys.h):
        gap = np.maximum(gap, np.abs(lie_batch(gi, ps.V, X) - hi.batch(X)))
    return LfV, gap, ps.V.batch(X)


def check_passivity(ps: PassiveSystem, samples, tol=PASSIVITY_TOL, rng=None,
                    box=None) -> Verdict:
    """Pointwise check of L_f V <= 0, L_g V = h^T and V >= 0.

    ``samples`` is an array of states or a count drawn uniformly from ``box``.
    """
    sys = ps.sys
    X = _samples(samples, sys.n, rng, box)
    X = X[sys.space.contains(X)]
    LfV, gap, V = passivity_residuals(ps, X)
    worst = {"LfV": float(np.max(LfV, initial=-np.inf)),
             "LgV_minus_h": float(np.max(gap, initial=0.0)),
             "min_V": float(np.min(V, initial=np.inf))}
    params = {"samples": len(X), "tol": tol, "r": ps.r}
    checks = [("LfV", LfV, LfV > tol), ("LgV_minus_h", gap, gap > tol),
              ("V_negative", -V, V < -tol)]
    for name, score, bad in checks:
        if bad.any():
            i = int(np.argmax(np.where(bad, score, -np.inf)))
            return Verdict("passivity", "fails", params=params, details=worst,
                           witness={"x0": X[i], "time": 0.0, "distance": float(score[i]),
                                    "violation": name})
    return Verdict("passivity", "holds", params=params, details=worst)


def check_feedback_admissible(sys: ControlAffineSystem, fb, samples, tol=1e-9,
                              margin=1e-12, rng=None, box=None) -> Verdict:
    """phi vanishes where h does and h^T phi > 0 elsewhere.

    Points with ``|h| <= tol`` test the first condition. At the others
    the pairing must exceed ``margin * |h|^2``; the strict inequality is
    only sampled, so a pass on a partial sample is flagged.
    """
    X = _samples(samples, sys.n, rng, box)
    X = X[sys.space.contains(X)]
    H = np.atleast_2d(sys.output(X)).reshape(len(X), sys.m)
    P = np.atleast_2d(fb(X)).reshape(len(X), sys.m)
    hn = np.linalg.norm(H, axis=1)
    zero = hn <= tol
    params = {"samples": len(X), "tol": tol, "margin": margin, "feedback": fb.name}
    if zero.any():
        pn = np.linalg.norm(P[zero], axis=1)
        if pn.max() > tol:
            i = int(np.flatnonzero(zero)[np.argmax(pn)])
            return Verdict("feedback_admissible", "fails", params=params,
                           witness={"x0": X[i], "time": 0.0, "distance": float(pn.max()),
                                    "violation": "phi nonzero where h = 0"})
    nz = ~zero
    if not nz.any():
        return Verdict("feedback_admissible", "inconclusive", params=params,
                       notes=["no sample with h != 0"])
    pair = np.sum(H[nz] * P[nz], axis=1)
    bad = pair <= margin * hn[nz] ** 2
    if bad.any():
        i = int(np.flatnonzero(nz)[np.argmin(np.where(bad, pair, np.inf))])
        return Verdict("feedback_admissible", "fails", params=params,
                       witness={"x0": X[i], "time": 0.0, "distance": float(-pair.min()),
                                "violation": "h^T phi not positive"})
    notes = []
    if not zero.any():
        notes.append("no sample with h = 0; vanishing condition untested")
    return Verdict("feedback_admissible", "holds", params=params, notes=notes,
                   details={"min_pairing_ratio": float(np.min(pair / hn[nz] ** 2))})


def check_storage_monotone(traj: Trajectory, solver_tol=1e-9, tol=MONOTONE_TOL) -> Verdict:
    """V along a trajectory never increases by more than ``tol + 10*solver_tol``."""
    if traj.storage is None:
        raise InputError("trajectory carries no storage values")
    V = np.asarray(traj.storage, dtype=float)
    allowed = tol + 10 * solver_tol
    params = {"allowed_increase": allowed, "points": len(V)}
    if len(V) < 2:
        return Verdict("storage_monotone", "holds", params=params)
    inc = np.diff(V)
    i = int(np.argmax(inc))
    details = {"max_increase": float(inc[i]), "V0": float(V[0]), "VT": float(V[-1])}
    if inc[i] > allowed:
        return Verdict("storage_monotone", "fails", params=params, details=details,
                       witness={"x0": traj.states[0], "time": float(traj.times[i + 1]),
                                "distance": float(inc[i])})
    return Verdict("storage_monotone", "holds", params=params, details=details)

"""Finite-sample estimates of positive limit sets and prolongational limit sets.

Limit sets are represented as point clouds together with the set of
occupied grid cells at resolution ``rho`` (measured in the embedding of
the state space). All uses downstream are inclusion tests against
:class:`~setstab.core.ClosedSetSpec` distances, so no manifold is fitted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import InputError, Verdict
from .integrate import DEFAULT, IntegratorConfig, boundedness_probe, integrate
from .sampling import near_point, near_set

RHO = 1e-2
BURN_IN = 0.8


@dataclass
class LimitSetEstimate:
    """Point-cloud estimate of L+(x0) or J+(x0, U).

    ``sources`` holds, per point, the initial condition index and the
    time at which the point was visited; ``initial_conditions`` lists
    those initial conditions so any point can be regenerated.
    """

    points: np.ndarray
    x0: np.ndarray
    horizon: float
    burn_in: float
    rho: float
    kind: str = "omega"
    cells: frozenset = frozenset()
    ladder: tuple = ()
    escaped: bool = False
    inconclusive: bool = False
    sources: Optional[np.ndarray] = None
    initial_conditions: Optional[np.ndarray] = None
    notes: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @property
    def empty(self):
        return len(self.points) == 0

    def max_distance_to(self, S):
        if self.empty:
            return float("nan")
        return float(np.max(S.dist(self.points)))

    def witness_for(self, S):
        """Initial condition, time and distance of the point farthest from S."""
        if self.empty:
            return None
        d = S.dist(self.points)
        i = int(np.argmax(d))
        w = {"point": self.points[i], "distance": float(d[i])}
        if self.sources is not None and self.initial_conditions is not None:
            ic, t = self.sources[i]
            w["x0"] = self.initial_conditions[int(ic)]
            w["time"] = float(t)
        return w

    def to_csv(self, path):
        n = self.points.shape[1] if self.points.ndim == 2 else len(self.x0)
        header = ",".join(f"x{i + 1}" for i in range(n))
        np.savetxt(path, np.atleast_2d(self.points).reshape(-1, n), delimiter=",",
                   fmt="%.17g", header=header, comments="")


def occupancy(points, space, rho):
    if len(points) == 0:
        return frozenset()
    E = space.embed(points)
    return frozenset(map(tuple, np.floor(E / rho).astype(np.int64)))


def hausdorff(A, B, space):
    """Symmetric Hausdorff distance between two finite clouds."""
    if len(A) == 0 or len(B) == 0:
        return float("inf")
    EA, EB = space.embed(A), space.embed(B)
    d1 = cKDTree(EB).query(EA)[0].max()
    d2 = cKDTree(EA).query(EB)[0].max()
    return float(max(d1, d2))


def _thin(points, space, cell):
    """Keep one point per grid cell of size ``cell`` (first occurrence)."""
    if len(points) == 0:
        return np.zeros(0, dtype=int)
    keys = np.floor(space.embed(points) / cell).astype(np.int64)
    keys -= keys.min(axis=0)
    span = keys.max(axis=0) + 1
    if np.prod(span.astype(float)) < 2.0 ** 62:
        # one integer per cell: a 1-D unique is much cheaper than a row-wise one
        flat = np.ravel_multi_index(keys.T, tuple(int(v) for v in span))
        _, idx = np.unique(flat, return_index=True)
    else:
        _, idx = np.unique(keys, axis=0, return_index=True)
    return np.sort(idx)


def _densify(times, states, space, spacing):
    """Insert linear interpolants so consecutive embedded points are close."""
    if len(times) < 2:
        return times, states
    E = space.embed(states)
    gaps = np.linalg.norm(np.diff(E, axis=0), axis=1)
    reps = np.maximum(1, np.ceil(gaps / spacing).astype(int))
    if np.all(reps == 1):
        return times, states
    seg = np.repeat(np.arange(len(reps)), reps)
    start = np.cumsum(reps) - reps
    s = (np.arange(seg.size) - start[seg] + 1) / reps[seg]
    ts = times[seg] + s * (times[seg + 1] - times[seg])
    xs = states[seg] + s[:, None] * (states[seg + 1] - states[seg])
    return np.concatenate([times[:1], ts]), np.vstack([states[:1], xs])


def omega_limit_estimate(fld, x0, cfg: IntegratorConfig = DEFAULT, burn_in=BURN_IN,
                         rho=RHO) -> LimitSetEstimate:
    """Tail of the trajectory from ``x0`` after ``burn_in * T``.

    The cloud consists of the solver's accepted steps in the tail; it is
    empty (with ``escaped`` set) when the solution is unbounded or stops
    existing before the horizon.
    """
    x0 = np.asarray(x0, dtype=float)
    t_burn = burn_in * cfg.T
    tr = integrate(fld, x0, cfg.replace(record_from=t_burn), on_nan="flag")
    space = fld.space
    if tr.status != "ok":
        return LimitSetEstimate(np.empty((0, fld.n)), x0, cfg.T, burn_in, rho,
                                escaped=True, notes=[f"trajectory {tr.status} at "
                                                     f"t={tr.times[-1]:.6g}"])
    mask = tr.times >= t_burn
    pts = tr.states[mask]
    src = np.column_stack([np.zeros(mask.sum()), tr.times[mask]])
    return LimitSetEstimate(pts, x0, cfg.T, burn_in, rho, kind="omega",
                            cells=occupancy(pts, space, rho), sources=src,
                            initial_conditions=x0[None, :],
                            params={"T": cfg.T, "burn_in": burn_in, "rho": rho})


def prolongational_limit_estimate(fld, x0, U=None, cfg: IntegratorConfig = DEFAULT,
                                  delta0=0.1, K=6, per_level=16, rho=RHO, persist=3,
                                  record_fraction=0.25, growth=2.0, rng=None,
                                  tol=1e-7) -> LimitSetEstimate:
    """Estimate J+(x0, U) from a ladder of shrinking perturbations.

    Level ``k`` draws initial conditions in ``B(x0, delta0 * 2**-k)``
    (moved onto ``U`` when given), integrates them over
    ``T * growth**k`` and records the states visited after
    ``record_fraction`` of that horizon, so both the perturbation size
    and the recorded times follow the x_n -> x0, t_n -> inf limit. Points
    of the finest level that are within ``2 rho`` of the clouds of the
    previous ``persist - 1`` levels form the estimate. Escaping
    trajectories contribute nothing.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x0 = np.asarray(x0, dtype=float)
    space = fld.space
    if U is not None and float(U.dist(x0)) > max(tol, U.membership_tol):
        raise InputError(f"base point is {float(U.dist(x0)):.3g} away from {U.name}")
    levels, level_src, ladder = [], [], []
    ics_all = []
    escaped = 0
    total = 0
    notes = []
    inconclusive = False
    for k in range(K + 1):
        delta = delta0 * 2.0 ** -k
        ladder.append(delta)
        P = near_point(rng, x0, delta, per_level, space, relative=U)
        if U is not None and len(P):
            P = P[U.dist(P) <= max(tol, U.membership_tol)]
        if len(P) == 0:
            notes.append(f"no initial condition in U within {delta:.3g}")
            inconclusive = True
            levels.append(np.empty((0, fld.n)))
            level_src.append(np.empty((0, 2)))
            continue
        P = np.vstack([x0, P])
        Tk = cfg.T * growth ** k
        t_rec = record_fraction * Tk
        kcfg = cfg.replace(T=Tk, record_from=t_rec)
        clouds, srcs = [], []
        for x in P:
            total += 1
            tr = integrate(fld, x, kcfg, on_nan="flag")
            ics_all.append(x)
            if tr.status != "ok":
                escaped += 1
                continue
            m = tr.times >= t_rec
            ts, xs = _densify(tr.times[m], tr.states[m], space, rho / 2)
            keep = _thin(xs, space, rho / 2)
            clouds.append(xs[keep])
            srcs.append(np.column_stack([np.full(keep.size, len(ics_all) - 1), ts[keep]]))
        levels.append(np.vstack(clouds) if clouds else np.empty((0, fld.n)))
        level_src.append(np.vstack(srcs) if srcs else np.empty((0, 2)))

    params = {"delta0": delta0, "K": K, "per_level": per_level, "rho": rho,
              "persist": persist, "growth": growth, "record_fraction": record_fraction,
              "T0": cfg.T}
    final = levels[-1]
    src = level_src[-1]
    if len(final):
        keep = np.ones(len(final), dtype=bool)
        E = space.embed(final)
        for j in range(max(0, K + 1 - persist), K):
            if len(levels[j]) == 0:
                keep[:] = False
                break
            d = cKDTree(space.embed(levels[j])).query(E)[0]
            keep &= d <= 2 * rho
        final, src = final[keep], src[keep]
    all_escaped = total > 0 and escaped == total
    if all_escaped:
        notes.append("every perturbed trajectory escaped")
    return LimitSetEstimate(final, x0, cfg.T * growth ** K, record_fraction, rho,
                            kind="prolongational", cells=occupancy(final, space, rho),
                            ladder=tuple(ladder), escaped=all_escaped,
                            inconclusive=inconclusive and not len(final),
                            sources=src, initial_conditions=np.array(ics_all),
                            notes=notes + [f"{escaped}/{total} trajectories escaped"],
                            params=params)


def uniform_attractor_test(fld, Gamma, U=None, radius=0.1, cfg: IntegratorConfig = DEFAULT,
                           n_base=6, band=None, rng=None, lub_points=3, **jkw) -> Verdict:
    """Empirical J+(N(Gamma), U) inside Gamma test of uniform semi-attractivity.

    Local uniform boundedness is probed first; without it the
    characterisation does not apply and the verdict is inconclusive.
    Base points are drawn on Gamma and within ``radius`` of it (on
    ``U`` when given); the verdict fails when some prolongational
    estimate reaches farther than ``band`` from Gamma.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    rho = jkw.get("rho", RHO)
    band = 3 * rho if band is None else band
    params = {"radius": radius, "n_base": n_base, "band": band, "T": cfg.T,
              "empirical": True, **jkw}
    for x in np.atleast_2d(Gamma.sample_on(rng, lub_points)):
        probe = boundedness_probe(fld, x, cfg, rng=rng, samples=8, levels=6)
        if not probe.ok:
            return Verdict("uniform_semi_attractor", "inconclusive", params=params,
                           notes=["local uniform boundedness not observed near "
                                  f"{np.round(x, 6).tolist()}"],
                           details={"lub_witness": probe.witness})
    on = np.atleast_2d(Gamma.sample_on(rng, n_base - n_base // 2))
    if U is not None and U.project is not None:
        on = U.project(on)
    near = near_set(rng, Gamma, radius, n_base // 2, relative=U, space=fld.space)
    bases = np.vstack([on, near]) if len(near) else on
    bases = bases[fld.space.contains(bases)]
    worst = None
    inconclusive = []
    for b in bases:
        est = prolongational_limit_estimate(fld, b, U, cfg, rng=rng, **jkw)
        if est.empty:
            if est.inconclusive:
                inconclusive.append(b)
            continue
        w = est.witness_for(Gamma)
        if "x0" in w and w["time"] > 0:
            # report the distance of the exact solution at that time so the
            # witness replays without interpolation error
            tr = integrate(fld, w["x0"], cfg.replace(T=w["time"]), on_nan="flag")
            w["point"] = tr.states[-1]
            w["distance"] = float(Gamma.dist(tr.states[-1]))
        if w["distance"] > band and (worst is None or w["distance"] > worst["distance"]):
            worst = dict(w, base=b)
    if worst is not None:
        return Verdict("uniform_semi_attractor", "fails", witness=worst, params=params,
                       notes=["prolongational limit points found away from the set"])
    if inconclusive:
        return Verdict("uniform_semi_attractor", "inconclusive", params=params,
                       notes=[f"{len(inconclusive)} base points had no admissible "
                              "perturbations"])
    return Verdict("uniform_semi_attractor", "holds", params=params,
                   notes=["finite perturbation ladder: supports, does not prove"])

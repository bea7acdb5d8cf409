"""Empirical checks of set stability and attractivity, absolute and relative.

Every quantifier is decided by a ladder of radii and a finite sample of
initial conditions with explicit floors, so a verdict is falsifiable
evidence, never a proof. ``fails`` verdicts carry a witness
``{"x0", "time", "distance"}`` that :func:`replay_witness` reproduces.

Finite horizons are handled by extension: a trajectory whose distance
to the set is still drifting at the end of the horizon is continued,
doubling the horizon up to ``cap_factor * T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ClosedSetSpec, InputError, Verdict, combine
from .integrate import DEFAULT, IntegratorConfig, boundedness_probe, integrate, integrate_until
from .sampling import in_box, near_point, near_set

PROPERTIES = ("stable", "semi_attractor", "global_attractor", "uniform_semi_attractor",
              "semi_asymptotically_stable", "globally_semi_asymptotically_stable")
INVARIANCE_BAND = 1e-6


@dataclass(frozen=True)
class StabilityQuery:
    """What to check and how hard to look.

    Parameters
    ----------
    prop : str
        One of :data:`PROPERTIES`.
    relative_to : ClosedSetSpec, optional
        Restrict initial conditions to this set (relative notions).
    eps_ladder : tuple
        Decreasing tolerances for stability and uniform attractivity.
    delta_floor : float
        Smallest neighbourhood radius tried before declaring failure.
    samples : int
        Initial conditions per ladder cell.
    horizon : float
        Base integration horizon; extended up to ``cap_factor`` times.
    band : float
        Distance below which a trajectory counts as having reached the set.
    neighborhood : float
        Radius of the neighbourhood used for (semi-)attractivity.
    box : sequence of (lo, hi), optional
        Sampling box for global notions.
    """

    prop: str
    relative_to: Optional[ClosedSetSpec] = None
    eps_ladder: tuple = (0.5, 0.2, 0.1, 0.05)
    delta_floor: float = 1e-4
    samples: int = 64
    horizon: float = 200.0
    band: float = 1e-3
    neighborhood: float = 0.1
    box: Optional[tuple] = None
    cap_factor: int = 4096
    base_points: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.prop not in PROPERTIES:
            raise InputError(f"unknown property {self.prop!r}; expected one of {PROPERTIES}")
        eps = tuple(float(e) for e in self.eps_ladder)
        if not eps or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise InputError("eps ladder must be positive and strictly decreasing")
        object.__setattr__(self, "eps_ladder", eps)
        if self.samples < 1 or self.base_points < 1:
            raise InputError("sample counts must be positive")
        if not (0 < self.delta_floor and 0 < self.band and self.horizon > 0
                and self.neighborhood > 0 and self.cap_factor >= 1):
            raise InputError("floors, bands, radii and horizons must be positive")
        if self.prop in ("global_attractor", "globally_semi_asymptotically_stable") \
                and self.box is None:
            raise InputError(f"{self.prop} needs a sampling box")

    def params(self):
        return {"property": self.prop,
                "relative_to": None if self.relative_to is None else self.relative_to.name,
                "eps_ladder": list(self.eps_ladder), "delta_floor": self.delta_floor,
                "samples": self.samples, "T": self.horizon, "cap_factor": self.cap_factor,
                "band": self.band, "neighborhood": self.neighborhood,
                "box": None if self.box is None else [list(b) for b in self.box],
                "seed": self.seed}

    def with_prop(self, prop, **kw):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw, prop=prop)
        return StabilityQuery(**d)


# --------------------------------------------------------------------------
# trajectory helpers
# --------------------------------------------------------------------------

def _tail_window(traj, frac=0.1):
    t = traj.times
    return t >= t[-1] - frac * (t[-1] - t[0])


def _tail_sup(d, traj, frac=0.1):
    return float(np.max(d[_tail_window(traj, frac)]))


DRIFT_FLOOR = 1e-8
ON_SET = 1e-12


def _drifting_away(S, ceiling, floor=DRIFT_FLOOR):
    """Continue while the distance is still growing at the end and below ``ceiling``.

    A solution that starts on the (invariant) set is never extended: its
    distance can only grow through accumulated local error, which a long
    rotation along the set turns into a slow linear creep. Distances
    under ``floor`` never trigger extension either.
    """
    def need(traj):
        d = S.dist(traj.states)
        if d.max() >= ceiling or d[0] <= ON_SET or d[-1] < floor:
            return False
        t = traj.times
        earlier = np.interp(0.75 * t[-1], t, d)
        return d[-1] > earlier * (1 + 1e-6)
    return need


def _not_yet_within(S, band, plateau_after=None):
    """Continue while the tail is above ``band``; with ``plateau_after``,
    stop once a non-decaying plateau has lasted past that time."""
    def need(traj):
        d = S.dist(traj.states)
        if _tail_sup(d, traj) <= band:
            return False
        if plateau_after is not None and traj.times[-1] >= plateau_after:
            # only an essentially flat plateau stops early; slow
            # algebraic decay keeps extending
            return not _settled_far(d, traj, band, ratio=0.999)
        return True
    return need


def _settled_far(d, traj, band, ratio=0.9):
    """True when the distance stays above ``band`` and its late maximum
    is at least ``ratio`` times the earlier one."""
    t = traj.times
    a = (t >= 0.5 * t[-1]) & (t < 0.75 * t[-1])
    b = t >= 0.75 * t[-1]
    if not a.any() or not b.any():
        return False
    late, early = float(d[b].max()), float(d[a].max())
    return late > band and late >= ratio * early


def _witness(x0, traj, d, idx, target):
    return {"x0": np.asarray(x0, dtype=float), "time": float(traj.times[idx]),
            "distance": float(d[idx]), "target": target}


def replay_witness(fld, S, witness, cfg: IntegratorConfig = DEFAULT):
    """Distance to ``S`` of the solution from ``witness['x0']`` at ``witness['time']``."""
    t = float(witness["time"])
    x0 = np.asarray(witness["x0"], dtype=float)
    if t <= 0:
        return float(S.dist(x0))
    tr = integrate(fld, x0, cfg.replace(T=t), on_nan="flag")
    return float(S.dist(tr.states[-1]))


def check_invariance(fld, S, cfg, rng, k=4, T=50.0, band=INVARIANCE_BAND):
    """Largest distance to S reached from sampled points of S."""
    worst = 0.0
    P = np.atleast_2d(S.sample_on(rng, k))
    P = P[fld.space.contains(P)]
    for x in P:
        tr = integrate(fld, x, cfg.replace(T=min(T, cfg.T)), on_nan="flag")
        worst = max(worst, float(np.max(S.dist(tr.states))))
    return worst


# --------------------------------------------------------------------------
# the notions
# --------------------------------------------------------------------------

class _Runner:
    """Runs and caches trajectories with horizon extension."""

    def __init__(self, fld, cfg, q, relative):
        self.fld, self.cfg, self.q, self.relative = fld, cfg, q, relative
        self.max_rel_dev = 0.0

    def run(self, x0, need_more=None):
        tr = integrate_until(self.fld, x0, self.cfg, need_more=need_more,
                             cap_factor=self.q.cap_factor)
        if self.relative is not None and tr.status == "ok":
            self.max_rel_dev = max(self.max_rel_dev,
                                   float(np.max(self.relative.dist(tr.states))))
        return tr

    def notes(self):
        if self.relative is not None and self.max_rel_dev > INVARIANCE_BAND:
            return [f"trajectories left {self.relative.name} by up to "
                    f"{self.max_rel_dev:.3g}: it is not positively invariant"]
        return []


def _delta_levels(top, floor):
    out = []
    d = top
    while d > floor * (1 + 1e-12):
        out.append(d)
        d /= 2.0
    out.append(floor)
    return out


def _stable(fld, G, q, cfg, rng, runner):
    eps = q.eps_ladder
    levels = _delta_levels(eps[0], q.delta_floor)
    cache = {}

    def level(j):
        if j not in cache:
            X0 = near_set(rng, G, levels[j], q.samples, relative=q.relative_to,
                          space=fld.space)
            rows = []
            for x0 in X0:
                tr = runner.run(x0, _drifting_away(G, eps[0]))
                d = G.dist(tr.states)
                if tr.status in ("escaped", "collapsed", "nan"):
                    d = np.append(d, np.inf)
                i = int(np.argmax(d))
                rows.append((float(d[i]), x0, tr, min(i, len(tr.times) - 1), d))
            cache[j] = rows
        return cache[j]

    table = {}
    j = 0
    for e in eps:
        while levels[j] >= e and j < len(levels) - 1:
            j += 1
        while True:
            rows = level(j)
            if not rows:
                return Verdict("stable", "inconclusive", params=q.params(),
                               notes=["no initial conditions could be sampled"] + runner.notes())
            bad = [r for r in rows if r[0] >= e]
            if not bad:
                table[e] = levels[j]
                break
            if j == len(levels) - 1:
                sup, x0, tr, i, d = max(bad, key=lambda r: r[0])
                w = _witness(x0, tr, d, i, G.name)
                if not np.isfinite(w["distance"]):
                    w["distance"] = float(np.max(G.dist(tr.states)))
                    w["status"] = tr.status
                w["eps"] = e
                w["delta"] = levels[j]
                return Verdict("stable", "fails", witness=w, params=q.params(),
                               notes=[f"violations persist down to delta={levels[j]:g}"]
                               + runner.notes(),
                               details={"delta_for_eps": table})
            j += 1
    return Verdict("stable", "holds", params=q.params(),
                   details={"delta_for_eps": table}, notes=runner.notes())


def _converge(X0, G, q, runner):
    """Run from each row of X0; return the worst settled-far witness and
    the initial conditions still undecided at the horizon cap."""
    fail = None
    unsure = []
    for x0 in X0:
        tr = runner.run(x0, _not_yet_within(G, q.band, 16 * runner.cfg.T))
        d = G.dist(tr.states)
        if tr.status != "ok":
            if d[-1] > q.band:
                fail = fail or {"x0": x0, "time": float(tr.times[-1]),
                                "distance": float(d[-1]), "target": G.name,
                                "status": tr.status}
            continue
        if _tail_sup(d, tr) <= q.band:
            continue
        if _settled_far(d, tr, q.band):
            i = int(np.flatnonzero(tr.times >= 0.75 * tr.times[-1])[0])
            i = i + int(np.argmax(d[i:]))
            w = _witness(x0, tr, d, i, G.name)
            if fail is None or w["distance"] > fail["distance"]:
                fail = w
        else:
            unsure.append((x0, float(tr.times[-1]), float(d[-1])))
    return fail, unsure


def _attractor(fld, G, q, cfg, rng, runner, global_, source=None, prop=None):
    """Convergence to ``G`` from a neighbourhood of ``source`` (default ``G``)."""
    prop = prop or ("global_attractor" if global_ else "semi_attractor")
    source = G if source is None else source
    if global_:
        radii = [None]
    else:
        radii = [q.neighborhood, q.neighborhood / 4, q.neighborhood / 16]
    last_fail = None
    last_unsure = []
    for lam in radii:
        if lam is None:
            X0 = in_box(rng, q.box, q.samples, relative=q.relative_to, space=fld.space)
        else:
            X0 = near_set(rng, source, lam, q.samples, relative=q.relative_to,
                          space=fld.space)
        if len(X0) == 0:
            return Verdict(prop, "inconclusive", params=q.params(),
                           notes=["no initial conditions could be sampled"])
        fail, unsure = _converge(X0, G, q, runner)
        if fail is None and not unsure:
            return Verdict(prop, "holds", params=dict(q.params(), radius=lam),
                           notes=runner.notes())
        # failure needs a settled-far witness at every radius tried
        last_fail, last_unsure = fail, unsure
    if last_fail is not None:
        return Verdict(prop, "fails", witness=last_fail, params=q.params(),
                       notes=["trajectories settle away from the set"] + runner.notes())
    return Verdict(prop, "inconclusive", params=q.params(),
                   notes=["distance still decaying at the horizon cap for "
                          f"{len(last_unsure)} initial conditions"] + runner.notes(),
                   details={"unsettled": [{"x0": u[0], "t_end": u[1], "distance": u[2]}
                                          for u in last_unsure[:5]]})


def _uniform(fld, G, q, cfg, rng, runner):
    prop = "uniform_semi_attractor"
    eps = q.eps_ladder
    bases = np.atleast_2d(G.sample_on(rng, q.base_points))
    bases = bases[fld.space.contains(bases)]
    unsure = False
    worst = None
    exit_table = []
    for x in bases:
        X0 = near_point(rng, x, q.neighborhood, q.samples, fld.space,
                        relative=q.relative_to)
        if len(X0) == 0:
            unsure = True
            continue
        d0 = G.dist(X0)
        tau = np.zeros((len(X0), len(eps)))
        trajs = []
        for k, x0 in enumerate(X0):
            settle, drift = _not_yet_within(G, eps[-1]), _drifting_away(G, eps[0])
            tr = runner.run(x0, lambda t, s=settle, dr=drift: s(t) or dr(t))
            d = G.dist(tr.states)
            trajs.append((tr, d))
            if tr.status != "ok" or _tail_sup(d, tr) >= eps[-1]:
                if tr.status == "ok" and _settled_far(d, tr, eps[-1]):
                    i = int(np.argmax(d[_tail_window(tr, 0.25)])) + \
                        int(np.flatnonzero(_tail_window(tr, 0.25))[0])
                    return Verdict(prop, "fails", witness=_witness(x0, tr, d, i, G.name),
                                   params=q.params(),
                                   notes=["a trajectory from the neighbourhood is not "
                                          "attracted at all"] + runner.notes())
                unsure = True
                tau[k, :] = np.inf
                continue
            for m, e in enumerate(eps):
                above = np.flatnonzero(d >= e)
                tau[k, m] = tr.times[above[-1]] if above.size else 0.0
        exit_table.append({"base": x, "T_eps": tau.max(axis=0)})
        # uniformity: last-exit times must not blow up as the initial
        # distance to the set shrinks
        pos = d0 > 0
        if pos.sum() < 8:
            continue
        order = np.argsort(d0[pos])
        idx = np.flatnonzero(pos)[order]
        q4 = max(3, len(idx) // 4)
        inner, outer = idx[:q4], idx[-q4:]
        span = np.log10(d0[outer].min() / max(d0[inner].max(), 1e-300))
        for m, e in enumerate(eps):
            ti, to = tau[inner, m], tau[outer, m]
            ti_f = ti[np.isfinite(ti)]
            if ti_f.size == 0:
                continue
            if span > 0.5 and ti_f.max() > 4.0 * max(float(np.max(to[np.isfinite(to)],
                                                                 initial=0.0)), 1.0):
                k = int(inner[np.argmax(np.where(np.isfinite(ti), ti, -1))])
                tr, d = trajs[k]
                i = int(np.flatnonzero(tr.times == tau[k, m])[0])
                w = _witness(X0[k], tr, d, i, G.name)
                w.update(eps=e, base=x)
                if worst is None or tau[k, m] > worst["time"]:
                    worst = w
    if worst is not None:
        return Verdict(prop, "fails", witness=worst, params=q.params(),
                       notes=["last exit times from B_eps grow without bound as "
                              "initial conditions approach the set"] + runner.notes(),
                       details={"exit_times": exit_table})
    if unsure or not exit_table:
        return Verdict(prop, "inconclusive", params=q.params(),
                       notes=["some trajectories did not reach the smallest eps within "
                              "the horizon cap"] + runner.notes(),
                       details={"exit_times": exit_table})
    return Verdict(prop, "holds", params=q.params(),
                   notes=["one lambda per base point assumed to serve every eps"]
                   + runner.notes(), details={"exit_times": exit_table})


def check_property(fld, Gamma: ClosedSetSpec, q: StabilityQuery,
                   cfg: IntegratorConfig = DEFAULT, rng=None) -> Verdict:
    """Decide ``q.prop`` for ``Gamma`` under ``x' = fld(x)`` by sampling."""
    rng = np.random.default_rng(q.seed) if rng is None else rng
    cfg = cfg.replace(T=q.horizon)
    dev = check_invariance(fld, Gamma, cfg, rng)
    if dev > INVARIANCE_BAND:
        raise InputError(f"{Gamma.name} is not positively invariant "
                         f"(trajectories leave it by {dev:.3g})")
    runner = _Runner(fld, cfg, q, q.relative_to)
    p = q.prop
    if p == "stable":
        v = _stable(fld, Gamma, q, cfg, rng, runner)
    elif p == "semi_attractor":
        v = _attractor(fld, Gamma, q, cfg, rng, runner, False)
    elif p == "global_attractor":
        v = _attractor(fld, Gamma, q, cfg, rng, runner, True)
    elif p == "uniform_semi_attractor":
        v = _uniform(fld, Gamma, q, cfg, rng, runner)
    else:
        glob = p == "globally_semi_asymptotically_stable"
        parts = [_stable(fld, Gamma, q, cfg, rng, runner),
                 _attractor(fld, Gamma, q, cfg, rng, runner, glob)]
        v = combine(p, parts, params=q.params())
    v.params.setdefault("relative_to", q.params()["relative_to"])
    return v


def check_attraction_near(fld, Gamma, O, q: StabilityQuery, cfg: IntegratorConfig = DEFAULT,
                          rng=None, global_=False) -> Verdict:
    """O attracts every sampled solution starting near Gamma.

    Local mode samples the neighbourhoods ``q.neighborhood * 4**-k`` of
    Gamma; global mode samples ``q.box``.
    """
    rng = np.random.default_rng(q.seed) if rng is None else rng
    cfg = cfg.replace(T=q.horizon)
    dev = check_invariance(fld, O, cfg, rng)
    if dev > INVARIANCE_BAND:
        raise InputError(f"{O.name} is not positively invariant "
                         f"(trajectories leave it by {dev:.3g})")
    runner = _Runner(fld, cfg, q, q.relative_to)
    prop = "global_attractor" if global_ else "locally_semi_attractive_near"
    v = _attractor(fld, O, q, cfg, rng, runner, global_, source=Gamma, prop=prop)
    v.params.update(target=O.name, source=Gamma.name)
    return v


def check_convergence_from(fld, G, X0, q: StabilityQuery, cfg: IntegratorConfig = DEFAULT,
                           prop="converges") -> Verdict:
    """Every solution from the rows of ``X0`` converges to ``G``."""
    cfg = cfg.replace(T=q.horizon)
    runner = _Runner(fld, cfg, q, None)
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    params = dict(q.params(), points=len(X0))
    if X0.size == 0:
        return Verdict(prop, "inconclusive", params=params, notes=["no points"])
    fail, unsure = _converge(X0, G, q, runner)
    if fail is not None:
        return Verdict(prop, "fails", witness=fail, params=params,
                       notes=["a solution settles away from the set"])
    if unsure:
        return Verdict(prop, "inconclusive", params=params,
                       notes=[f"{len(unsure)} solutions still approaching at the horizon cap"])
    return Verdict(prop, "holds", params=params)


def check_local_stability_near(fld, Gamma, O, cfg: IntegratorConfig = DEFAULT,
                               c_ladder=(0.5, 0.2), eps_ladder=(0.5, 0.2, 0.1, 0.05),
                               delta_floor=1e-4, samples=32, base_points=4, rng=None,
                               seed=0, tol=1e-7) -> Verdict:
    """Trajectories from near Gamma stay near O until they leave B_c(x).

    For sampled ``x`` in Gamma and each ``c`` and ``eps``, searches a
    ``delta`` such that every sampled solution from ``B_delta(x)``
    remains within ``eps`` of ``O`` up to its first exit from ``B_c(x)``.
    """
    prop = "locally_stable_near"
    rng = np.random.default_rng(seed) if rng is None else rng
    params = {"c_ladder": list(c_ladder), "eps_ladder": list(eps_ladder),
              "delta_floor": delta_floor, "samples": samples, "T": cfg.T,
              "O": O.name, "seed": seed}
    bases = np.atleast_2d(Gamma.sample_on(rng, base_points))
    bases = bases[fld.space.contains(bases)]
    if np.any(O.dist(bases) > max(tol, O.membership_tol)):
        raise InputError(f"{Gamma.name} is not contained in {O.name}")
    table = []
    for x in bases:
        cache = {}
        levels = _delta_levels(min(c_ladder[-1], eps_ladder[0]) / 2, delta_floor)

        def level(j, x=x, cache=cache):
            if j not in cache:
                X0 = near_point(rng, x, levels[j], samples, fld.space)
                out = []
                for x0 in X0:
                    tr = integrate(fld, x0, cfg, on_nan="flag")
                    r = fld.space.metric(tr.states, x)
                    dO = O.dist(tr.states)
                    out.append((x0, tr, r, dO))
                cache[j] = out
            return cache[j]

        for c in c_ladder:
            j = 0
            for e in eps_ladder:
                while True:
                    viol = None
                    for x0, tr, r, dO in level(j):
                        outside = np.flatnonzero(r >= c)
                        stop = outside[0] if outside.size else len(r)
                        if stop == 0:
                            continue
                        i = int(np.argmax(dO[:stop]))
                        if dO[i] >= e and (viol is None or dO[i] > viol["distance"]):
                            viol = {"x0": x0, "time": float(tr.times[i]),
                                    "distance": float(dO[i]), "target": O.name}
                    if viol is None:
                        table.append({"x": x, "c": c, "eps": e, "delta": levels[j]})
                        break
                    if j == len(levels) - 1:
                        viol.update(x=x, c=c, eps=e, delta=levels[j])
                        return Verdict(prop, "fails", witness=viol, params=params,
                                       notes=["trajectories drift away from O before "
                                              "leaving B_c(x), down to the delta floor"])
                    j += 1
    if not table:
        return Verdict(prop, "inconclusive", params=params, notes=["no base points"])
    return Verdict(prop, "holds", params=params, details={"delta_table": table})


def check_lub(fld, Gamma, cfg: IntegratorConfig = DEFAULT, points=4, samples=16, levels=8,
              rng=None, seed=0) -> Verdict:
    """Local uniform boundedness near Gamma at sampled points of Gamma."""
    rng = np.random.default_rng(seed) if rng is None else rng
    params = {"points": points, "samples": samples, "levels": levels, "T": cfg.T,
              "seed": seed}
    found = []
    for x in np.atleast_2d(Gamma.sample_on(rng, points)):
        if not bool(fld.space.contains(x)):
            continue
        res = boundedness_probe(fld, x, cfg, rng=rng, samples=samples, levels=levels)
        if not res.ok:
            w = dict(res.witness, base=x)
            return Verdict("locally_uniformly_bounded", "fails", witness=w, params=params,
                           notes=["every tested radius produced an unbounded solution"])
        found.append({"x": x, "lambda": res.lam, "m": res.m})
    return Verdict("locally_uniformly_bounded", "holds", params=params,
                   details={"bounds": found})


def check_bounded(fld, box, cfg: IntegratorConfig = DEFAULT, samples=64, rng=None, seed=0,
                  relative=None) -> Verdict:
    """All sampled trajectories from ``box`` stay bounded over the horizon."""
    rng = np.random.default_rng(seed) if rng is None else rng
    X0 = in_box(rng, box, samples, relative=relative, space=fld.space)
    params = {"samples": samples, "T": cfg.T, "box": [list(b) for b in box], "seed": seed}
    for x0 in X0:
        tr = integrate(fld, x0, cfg, on_nan="flag")
        nrm = np.linalg.norm(tr.states, axis=1)
        if tr.status != "ok":
            return Verdict("bounded", "fails", params=params,
                           witness={"x0": x0, "time": float(tr.times[-1]),
                                    "distance": float(nrm[-1]), "status": tr.status})
        half = tr.times >= 0.5 * tr.times[-1]
        if nrm[half].max() > 2.0 * max(nrm[~half].max(initial=0.0), 1.0):
            i = int(np.argmax(nrm))
            return Verdict("bounded", "inconclusive", params=params,
                           notes=["norm still growing at the horizon"],
                           details={"x0": x0, "time": float(tr.times[i])})
    return Verdict("bounded", "holds", params=params)

"""Adaptive integration of open- and closed-loop vector fields.

Two interchangeable Dormand-Prince 5(4) backends exist: a compiled
kernel that evaluates the field from its traced op-tape, and a
pure-Python loop that calls the field directly. The compiled one is
used whenever it was built and the field could be traced; setting
``SETSTAB_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _pykernel
from .core import (InputError, NumericalDomainError, PassiveSystem, SmoothField,
                   Trajectory, close_loop)

try:
    if os.environ.get("SETSTAB_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
        raise ImportError("pure-Python backend forced by environment")
    from . import _kernel
except ImportError:
    _kernel = None

BACKEND = "compiled" if _kernel is not None else "python"
STATUS = ("ok", "escaped", "collapsed", "nan", "max_steps")


@dataclass(frozen=True)
class IntegratorConfig:
    """Solver settings.

    Parameters
    ----------
    rtol, atol : float
        Relative and absolute local error tolerances.
    max_step : float
        Upper bound on the step size.
    T : float
        Horizon.
    r_max : float
        Escape radius; integration stops once ``|x| > r_max``.
    stride : int
        Record every ``stride``-th accepted step.
    max_steps : int
        Hard cap on attempted steps.
    record_from : float
        Accepted steps before this time are not recorded (the initial
        point always is).
    """

    rtol: float = 1e-9
    atol: float = 1e-11
    max_step: float = math.inf
    T: float = 200.0
    r_max: float = 1e6
    stride: int = 1
    max_steps: int = 5_000_000
    record_from: float = 0.0

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise InputError("tolerances must be positive")
        if not self.T > 0:
            raise InputError("horizon T must be positive")
        if not self.max_step > 0:
            raise InputError("max_step must be positive")
        if self.stride < 1 or self.max_steps < 1:
            raise InputError("stride and max_steps must be >= 1")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


DEFAULT = IntegratorConfig()


def _rhs(field):
    fn = field.fn

    def rhs(x):
        return np.array([float(v) for v in fn(list(x))])
    return rhs


def integrate(field: SmoothField, x0, cfg: IntegratorConfig = DEFAULT,
              backend: Optional[str] = None, on_nan: str = "raise") -> Trajectory:
    """Integrate ``x' = field(x)`` on ``[0, cfg.T]``.

    Returns a :class:`Trajectory` whose ``status`` is ``"ok"``,
    ``"escaped"`` (norm beyond ``r_max``), ``"collapsed"`` (step size
    below ``1e-13*T``, i.e. the solution stops existing), ``"nan"`` or
    ``"max_steps"``. A NaN raises :class:`NumericalDomainError` unless
    ``on_nan="flag"``.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (field.n,):
        raise InputError(f"initial state has shape {x0.shape}, expected ({field.n},)")
    if not np.all(np.isfinite(x0)):
        raise InputError("initial state must be finite")
    if not bool(field.space.contains(x0)):
        raise InputError(f"initial state {x0} outside {field.space.name}")
    backend = backend or BACKEND
    if float(np.linalg.norm(x0)) > cfg.r_max:
        return Trajectory(np.array([0.0]), x0[None, :].copy(), status="escaped",
                          backend=backend)
    tape = field.tape if backend == "compiled" else None
    if backend == "compiled" and _kernel is not None and tape is not None:
        data, steps, rej, st = _kernel.dopri5(
            tape, np.ascontiguousarray(x0), float(cfg.T), cfg.rtol, cfg.atol,
            float(cfg.max_step), cfg.r_max, int(cfg.max_steps), int(cfg.stride),
            float(cfg.record_from))
    else:
        backend = "python"
        data, steps, rej, st = _pykernel.dopri5(
            _rhs(field), x0, float(cfg.T), cfg.rtol, cfg.atol, float(cfg.max_step),
            cfg.r_max, int(cfg.max_steps), int(cfg.stride), float(cfg.record_from))
    status = STATUS[st]
    if status == "nan" and on_nan == "raise":
        raise NumericalDomainError(
            f"field {field.name} produced a non-finite value near t={data[-1, 0]:.6g}, "
            f"x={data[-1, 1:]}")
    return Trajectory(data[:, 0].copy(), data[:, 1:].copy(), steps=int(steps),
                      rejected=int(rej), status=status, backend=backend)


def integrate_many(field, X0, cfg: IntegratorConfig = DEFAULT, backend=None,
                   on_nan="flag"):
    """Integrate from each row of ``X0``; runs are independent."""
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    return [integrate(field, x0, cfg, backend=backend, on_nan=on_nan) for x0 in X0]


def attach_closed_loop_signals(traj, ps, fb):
    """Fill ``inputs`` (u = -phi(x)) and ``storage`` (V(x)) of a trajectory."""
    traj.inputs = -np.atleast_2d(fb(traj.states)).reshape(len(traj.times), fb.m)
    traj.storage = ps.V.batch(traj.states)
    return traj


def integrate_closed_loop(ps: PassiveSystem, fb, x0, cfg: IntegratorConfig = DEFAULT,
                          backend=None, on_nan="raise") -> Trajectory:
    """Integrate under ``u = -phi(x)`` and record u(t) and V(x(t))."""
    field = close_loop(ps, fb)
    traj = integrate(field, x0, cfg, backend=backend, on_nan=on_nan)
    return attach_closed_loop_signals(traj, ps, fb)


def export_csv(traj: Trajectory, path):
    traj.to_csv(path)


@dataclass
class BoundednessResult:
    """Outcome of :func:`boundedness_probe`.

    ``ok`` with the largest tested radius ``lam`` whose sampled
    trajectories stayed within ``m`` of the base point, or ``ok=False``
    with an escaping initial condition as ``witness``.
    """

    ok: bool
    lam: Optional[float] = None
    m: Optional[float] = None
    witness: Optional[dict] = None
    ladder: tuple = ()


def boundedness_probe(field, x, cfg: IntegratorConfig = DEFAULT, rng=None,
                      samples=16, levels=8, lam0=1.0, contains=None):
    """Search ``lam`` in ``lam0 * 2**-k`` for bounded trajectories from B_lam(x).

    ``contains`` optionally restricts the sampled initial conditions
    (for instance to an open domain).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x = np.asarray(x, dtype=float)
    space = field.space
    ladder = []
    worst = None
    for k in range(levels):
        lam = lam0 * 2.0 ** -k
        ladder.append(lam)
        X0 = np.vstack([x, space.sample_ball(rng, x, lam, samples)])
        keep = space.contains(X0)
        if contains is not None:
            keep &= contains(X0)
        X0 = X0[keep]
        sup = 0.0
        bad = None
        for x0 in X0:
            tr = integrate(field, x0, cfg, on_nan="flag")
            if tr.status in ("escaped", "collapsed", "nan"):
                bad = {"x0": x0, "time": float(tr.times[-1]), "status": tr.status,
                       "distance": float(np.max(space.metric(tr.states, x)))}
                break
            sup = max(sup, float(np.max(space.metric(tr.states, x))))
        if bad is None:
            return BoundednessResult(True, lam, max(lam, sup), ladder=tuple(ladder))
        worst = bad
    return BoundednessResult(False, witness=worst, ladder=tuple(ladder))


def continue_trajectory(field, traj: Trajectory, extra_T, cfg: IntegratorConfig = DEFAULT,
                        backend=None):
    """Extend an ``ok`` trajectory by ``extra_T`` time units (autonomous field)."""
    if traj.status != "ok":
        return traj
    t0 = float(traj.times[-1])
    sub = cfg.replace(T=float(extra_T), record_from=max(0.0, cfg.record_from - t0))
    nxt = integrate(field, traj.states[-1], sub, backend=backend, on_nan="flag")
    return Trajectory(np.concatenate([traj.times, t0 + nxt.times[1:]]),
                      np.vstack([traj.states, nxt.states[1:]]),
                      steps=traj.steps + nxt.steps, rejected=traj.rejected + nxt.rejected,
                      status=nxt.status, backend=nxt.backend)


def integrate_until(field, x0, cfg: IntegratorConfig = DEFAULT, need_more=None,
                    cap_factor=4096, backend=None):
    """Integrate over ``cfg.T`` and keep doubling the horizon while
    ``need_more(traj)`` is true, up to ``cap_factor * cfg.T``."""
    traj = integrate(field, x0, cfg, backend=backend, on_nan="flag")
    if need_more is None:
        return traj
    cap = cfg.T * cap_factor
    while traj.status == "ok" and traj.times[-1] * 2 <= cap * (1 + 1e-12) and need_more(traj):
        traj = continue_trajectory(field, traj, traj.times[-1], cfg, backend=backend)
    return traj

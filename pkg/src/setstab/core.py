"""Domain types shared across the package and point-to-set geometry.

Vector fields and scalars are wrapped around *generic* callables: a
callable receives an indexable state ``x`` (``x[i]`` is component
``i``) and must only combine components with arithmetic and the
functions in :mod:`setstab.smath`. That keeps one definition usable
for plain evaluation, batched evaluation (``x[i]`` a numpy row),
forward-mode derivatives, Taylor jets and tape tracing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

OUTCOMES = ("holds", "fails", "inconclusive")


class InputError(ValueError):
    """Malformed or inconsistent user input."""


class ConfigurationError(ValueError):
    """A requested order or depth exceeds a configured cap."""


class NumericalDomainError(ArithmeticError):
    """A map produced a non-finite value."""


# --------------------------------------------------------------------------
# state spaces
# --------------------------------------------------------------------------

class StateSpace:
    """Coordinates of the state space and the ambient metric.

    ``embed`` maps chart coordinates into a Euclidean space where the
    norm is measured; ``chart`` is its inverse. The default is the
    identity (plain Euclidean R^n). ``contains`` rejects points outside
    the declared open domain.
    """

    def __init__(self, n, embed=None, chart=None, contains=None, name="R^n"):
        self.n = int(n)
        self._embed = embed
        self._chart = chart
        self._contains = contains
        self.name = name

    @property
    def euclidean(self):
        return self._embed is None

    def embed(self, X):
        X = np.asarray(X, dtype=float)
        return X if self._embed is None else self._embed(X)

    def chart(self, Y):
        Y = np.asarray(Y, dtype=float)
        return Y if self._chart is None else self._chart(Y)

    def contains(self, X):
        X = np.asarray(X, dtype=float)
        if self._contains is None:
            return np.all(np.isfinite(X), axis=-1)
        return self._contains(X)

    def metric(self, X, Y):
        return np.linalg.norm(self.embed(X) - self.embed(Y), axis=-1)

    def sample_ball(self, rng, center, radius, k, radial="uniform", floor=1e-3):
        """Draw ``k`` points within ``radius`` of ``center``.

        ``radial="log"`` spreads radii log-uniformly over
        ``[floor*radius, radius]`` so that very small perturbations are
        represented too.
        """
        c = self.embed(np.asarray(center, dtype=float))
        dim = c.shape[-1]
        d = rng.normal(size=(k, dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        if radial == "log":
            rad = radius * floor ** rng.random(k)
        else:
            rad = radius * rng.random(k) ** (1.0 / dim)
        pts = self.chart(c + d * rad[:, None] * (1.0 - 1e-12))
        return pts


def euclidean(n):
    return StateSpace(n)


def polar_space():
    """(r, theta, x3) with r > 0, measured chordally in (x1, x2, x3)."""

    def embed(X):
        r, th, z = X[..., 0], X[..., 1], X[..., 2]
        return np.stack([r * np.cos(th), r * np.sin(th), z], axis=-1)

    def chart(Y):
        return np.stack([np.hypot(Y[..., 0], Y[..., 1]),
                         np.arctan2(Y[..., 1], Y[..., 0]), Y[..., 2]], axis=-1)

    def contains(X):
        return (X[..., 0] > 0) & np.all(np.isfinite(X), axis=-1)

    return StateSpace(3, embed=embed, chart=chart, contains=contains,
                      name="polar (r>0, theta mod 2pi, x3)")


# --------------------------------------------------------------------------
# smooth maps
# --------------------------------------------------------------------------

def _as_state(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise InputError(f"state has dimension {x.shape[-1]}, expected {n}")
    return x


class SmoothScalar:
    """A smooth real-valued map ``x -> q(x)`` with smoothness order ``r``."""

    def __init__(self, fn, n, order=math.inf, name=None):
        self.fn = fn
        self.n = int(n)
        self.order = order
        self.name = name or getattr(fn, "__name__", "q")

    def __call__(self, x):
        x = _as_state(x, self.n)
        if x.ndim == 1:
            return float(self.fn(list(x)))
        return self.batch(x)

    def batch(self, X):
        X = _as_state(X, self.n)
        out = self.fn(X.T)
        return np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1]).copy()

    def __repr__(self):
        return f"SmoothScalar({self.name}, n={self.n})"


class SmoothField:
    """A smooth vector field on an n-dimensional state space."""

    def __init__(self, fn, n, name=None, space=None):
        self.fn = fn
        self.n = int(n)
        self.name = name or getattr(fn, "__name__", "f")
        self.space = space or StateSpace(n)
        self._tape = None
        self._traced = False

    def __call__(self, x):
        x = _as_state(x, self.n)
        if x.ndim == 1:
            out = np.array([float(v) for v in self.fn(list(x))])
            if out.shape != (self.n,):
                raise InputError(f"field {self.name} returned {out.shape[0]} "
                                 f"components, expected {self.n}")
            return out
        return self.batch(x)

    def batch(self, X):
        """Evaluate on an array of states of shape ``(..., n)``."""
        X = _as_state(X, self.n)
        comps = self.fn(X.T)
        out = np.empty(X.shape, dtype=float)
        for i, c in enumerate(comps):
            out[..., i] = c
        return out

    @property
    def tape(self):
        """Op-tape for the compiled integrator, or ``None`` if untraceable."""
        if not self._traced:
            from .tape import TraceError, trace_field
            try:
                self._tape = trace_field(self.fn, self.n)
            except TraceError:
                self._tape = None
            self._traced = True
        return self._tape

    def __repr__(self):
        return f"SmoothField({self.name}, n={self.n})"


def constant_field(vec, name=None):
    vec = [float(v) for v in vec]
    return SmoothField(lambda x: list(vec), len(vec), name=name or "const")


def linear_field(A, name=None):
    A = np.asarray(A, dtype=float)
    rows = [[float(a) for a in row] for row in A]
    n = A.shape[0]

    def fn(x):
        return [sum(a * x[j] for j, a in enumerate(row) if a != 0.0) + 0.0
                for row in rows]
    return SmoothField(fn, n, name=name or "linear")


@dataclass(frozen=True)
class ControlAffineSystem:
    """x' = f(x) + sum_i g_i(x) u_i,  y = h(x)."""

    f: SmoothField
    g: tuple
    h: tuple
    space: StateSpace = None
    name: str = "system"

    def __post_init__(self):
        g, h = tuple(self.g), tuple(self.h)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)
        if len(g) != len(h):
            raise InputError(f"{len(g)} input fields but {len(h)} outputs")
        for gi in g:
            if gi.n != self.f.n:
                raise InputError("input field dimension differs from drift")
        for hi in h:
            if hi.n != self.f.n:
                raise InputError("output dimension differs from drift")
        if self.space is None:
            object.__setattr__(self, "space", self.f.space)

    @property
    def n(self):
        return self.f.n

    @property
    def m(self):
        return len(self.g)

    def output(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([hi(x) for hi in self.h], axis=-1)


@dataclass(frozen=True)
class PassiveSystem:
    sys: ControlAffineSystem
    V: SmoothScalar
    r: int = 2

    def __post_init__(self):
        if self.V.n != self.sys.n:
            raise InputError("storage dimension differs from state dimension")
        if self.r < 1:
            raise InputError("smoothness order r must be >= 1")


@dataclass(frozen=True)
class FeedbackLaw:
    """u = -phi(x); ``phi`` is generic like the field callables."""

    phi: Callable
    m: int
    name: str = "phi"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.array([float(v) for v in self.phi(list(x))])
        comps = self.phi(x.T)
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), x.shape[:-1])
                         for c in comps], axis=-1)


def output_feedback(sys, gain=1.0):
    """phi = gain * h, i.e. u = -gain*y."""
    hs = [h.fn for h in sys.h]
    return FeedbackLaw(lambda x: [gain * hf(x) for hf in hs], sys.m,
                       name=f"u=-{gain:g}*y")


def zero_feedback(m):
    return FeedbackLaw(lambda x: [0.0] * m, m, name="u=0")


def close_loop(ps, fb):
    """Closed-loop field x -> f(x) - sum_i g_i(x) phi_i(x)."""
    sys = ps.sys if isinstance(ps, PassiveSystem) else ps
    if fb.m != sys.m:
        raise InputError(f"feedback has {fb.m} components, system has {sys.m} inputs")
    f = sys.f.fn
    gs = [gi.fn for gi in sys.g]
    phi = fb.phi
    n = sys.n

    def closed(x):
        fx = list(f(x))
        p = list(phi(x))
        for gi, pi in zip(gs, p):
            gx = gi(x)
            fx = [fx[k] - gx[k] * pi for k in range(n)]
        return fx

    return SmoothField(closed, n, name=f"{sys.f.name}|{fb.name}", space=sys.space)


# --------------------------------------------------------------------------
# closed sets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedSetSpec:
    """A closed set given by its distance function and samplers.

    ``dist`` and ``project`` act on arrays of shape ``(..., n)``;
    ``sample_on(rng, k)`` returns ``k`` points of the set. ``project``
    (nearest point) is optional but needed to draw initial conditions on
    lower-dimensional sets.
    """

    name: str
    n: int
    dist: Callable
    sample_on: Callable
    project: Optional[Callable] = None
    bounded: bool = True
    membership_tol: float = 1e-7
    space: StateSpace = None

    def __post_init__(self):
        if self.space is None:
            object.__setattr__(self, "space", StateSpace(self.n))

    def sample_near(self, rng, radius, k, radial="uniform"):
        base = np.atleast_2d(self.sample_on(rng, k))
        out = np.empty_like(base)
        for i, b in enumerate(base):
            out[i] = self.space.sample_ball(rng, b, radius, 1, radial=radial)[0]
        return out

    def contains(self, X, band=None):
        band = self.membership_tol if band is None else band
        return self.dist(X) <= band


def point_set(p, space=None, name=None):
    p = np.asarray(p, dtype=float)
    space = space or StateSpace(p.size)

    def dist(X):
        X = np.asarray(X, dtype=float)
        return space.metric(X, p)

    def sample_on(rng, k):
        return np.tile(p, (k, 1))

    def project(X):
        return np.broadcast_to(p, np.shape(X)).copy()

    return ClosedSetSpec(name or f"point{tuple(p.round(6))}", p.size, dist,
                         sample_on, project, bounded=True, space=space)


def coordinate_subspace(zero, n, box, name=None, space=None):
    """{x : x_i = 0 for i in ``zero``}; sampled over ``box`` on free axes.

    ``box`` is a sequence of (lo, hi) pairs, one per coordinate. The
    distance is the norm of the zeroed coordinates, valid whenever those
    coordinates are orthonormal in the ambient metric.
    """
    zero = tuple(sorted(zero))
    box = np.asarray(box, dtype=float)
    free = [i for i in range(n) if i not in zero]

    def dist(X):
        X = np.asarray(X, dtype=float)
        if not zero:
            return np.zeros(X.shape[:-1])
        return np.linalg.norm(X[..., list(zero)], axis=-1)

    def sample_on(rng, k):
        pts = np.zeros((k, n))
        for i in free:
            pts[:, i] = rng.uniform(box[i, 0], box[i, 1], k)
        return pts

    def project(X):
        Y = np.array(X, dtype=float, copy=True)
        Y[..., list(zero)] = 0.0
        return Y

    bounded = len(free) == 0
    label = name or ("{" + ",".join(f"x{i + 1}" for i in zero) + "=0}")
    return ClosedSetSpec(label, n, dist, sample_on, project, bounded=bounded,
                         space=space)


def whole_space(n, box, name="X"):
    return coordinate_subspace((), n, box, name=name)


def check_set_spec(S, rng, k=200, scale=1.0, tol=1e-9):
    """Spot-check the ClosedSetSpec invariants; returns the worst residuals."""
    on = np.atleast_2d(S.sample_on(rng, k))
    d_on = float(np.max(S.dist(on))) if len(on) else 0.0
    a = S.sample_near(rng, scale, k)
    b = S.sample_near(rng, scale, k)
    lip = np.abs(S.dist(a) - S.dist(b)) - S.space.metric(a, b)
    return {"on_set": d_on, "lipschitz_excess": float(np.max(lip)),
            "ok": d_on <= S.membership_tol and float(np.max(lip)) <= tol}


def distance(x, S):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != S.n:
        raise InputError(f"point of shape {x.shape} for a set in R^{S.n}")
    return float(S.dist(x))


def max_distance(P, S):
    """Finite-sample version of the maximal distance of P to S."""
    P = np.asarray(P, dtype=float)
    if P.size == 0:
        raise InputError("empty point set")
    P = np.atleast_2d(P)
    if P.shape[1] != S.n:
        raise InputError(f"points in R^{P.shape[1]} for a set in R^{S.n}")
    return float(np.max(S.dist(P)))


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: Optional[np.ndarray] = None
    storage: Optional[np.ndarray] = None
    steps: int = 0
    rejected: int = 0
    status: str = "ok"
    backend: str = ""

    @property
    def terminated_early(self):
        return self.status != "ok"

    @property
    def final(self):
        return self.states[-1]

    def tail(self, burn_in=0.8):
        t0 = self.times[0] + burn_in * (self.times[-1] - self.times[0])
        return self.states[self.times >= t0]

    def to_csv(self, path):
        n = self.states.shape[1]
        cols = [self.times[:, None], self.states]
        header = ["t"] + [f"x{i + 1}" for i in range(n)]
        if self.inputs is not None:
            cols.append(self.inputs)
            header += [f"u{i + 1}" for i in range(self.inputs.shape[1])]
        if self.storage is not None:
            cols.append(self.storage[:, None])
            header.append("V")
        np.savetxt(path, np.hstack(cols), delimiter=",", fmt="%.17g",
                   header=",".join(header), comments="")


@dataclass
class Verdict:
    """Empirical outcome of a definition or hypothesis check."""

    prop: str
    outcome: str
    witness: Optional[dict] = None
    params: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise InputError(f"unknown outcome {self.outcome!r}")
        if self.outcome == "fails" and self.witness is None:
            raise InputError(f"{self.prop}: a failing verdict needs a witness")

    @property
    def holds(self):
        return self.outcome == "holds"

    @property
    def fails(self):
        return self.outcome == "fails"

    def to_dict(self):
        return {"property": self.prop, "outcome": self.outcome,
                "witness": _jsonable(self.witness),
                "params": _jsonable(self.params),
                "notes": list(self.notes),
                "details": _jsonable(self.details)}


def _jsonable(obj):
    if obj is None or isinstance(obj, (str, bool)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Verdict):
        return obj.to_dict()
    return str(obj)


def combine(prop, verdicts, params=None):
    """Conjunction of verdicts: fails if any fails, else inconclusive if any is."""
    verdicts = list(verdicts)
    failing = [v for v in verdicts if v.fails]
    if failing:
        return Verdict(prop, "fails", witness=failing[0].witness, params=params or {},
                       details={"parts": verdicts})
    if any(v.outcome == "inconclusive" for v in verdicts):
        return Verdict(prop, "inconclusive", params=params or {},
                       details={"parts": verdicts})
    return Verdict(prop, "holds", params=params or {}, details={"parts": verdicts})


def as_points(P, n) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[-1] != n:
        raise InputError(f"points in R^{P.shape[-1]}, expected R^{n}")
    return P


__all__ = [
    "InputError", "ConfigurationError", "NumericalDomainError", "StateSpace",
    "euclidean", "polar_space", "SmoothScalar", "SmoothField", "constant_field",
    "linear_field", "ControlAffineSystem", "PassiveSystem", "FeedbackLaw",
    "output_feedback", "zero_feedback", "close_loop", "ClosedSetSpec", "point_set",
    "coordinate_subspace", "whole_space", "check_set_spec", "distance",
    "max_distance", "Trajectory", "Verdict", "combine", "as_points",
]

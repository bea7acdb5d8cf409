"""Initial-condition samplers shared by the empirical checkers."""
import numpy as np

from .core import ClosedSetSpec


def restrict(P, relative: ClosedSetSpec):
    """Move points onto ``relative``: project when possible, else reject."""
    if relative is None or len(P) == 0:
        return P
    if relative.project is not None:
        return np.asarray(relative.project(P), dtype=float)
    return P[relative.contains(P)]


def near_set(rng, S: ClosedSetSpec, radius, k, relative=None, space=None,
             log_fraction=0.5, floor=1e-3, max_rounds=20):
    """Up to ``k`` points within ``radius`` of ``S``, optionally on ``relative``.

    A fraction ``log_fraction`` of the points has log-uniform distance
    scales so that very small perturbations are represented.
    """
    space = space or S.space
    out = []
    have = 0
    for _ in range(max_rounds):
        need = k - have
        if need <= 0:
            break
        n_log = int(round(need * log_fraction))
        parts = []
        if need - n_log > 0:
            parts.append(S.sample_near(rng, radius, need - n_log, radial="uniform"))
        if n_log > 0:
            base = np.atleast_2d(S.sample_on(rng, n_log))
            parts.append(np.vstack([space.sample_ball(rng, b, radius, 1, radial="log",
                                                      floor=floor) for b in base]))
        P = restrict(np.vstack(parts), relative)
        if len(P):
            keep = space.contains(P) & (S.dist(P) <= radius)
            P = P[keep]
        if len(P):
            out.append(P)
            have += len(P)
    if not out:
        return np.empty((0, S.n))
    return np.vstack(out)[:k]


def near_point(rng, x, radius, k, space, relative=None, log_fraction=0.5, floor=1e-3,
               max_rounds=20):
    """Up to ``k`` points within ``radius`` of the point ``x``."""
    x = np.asarray(x, dtype=float)
    out, have = [], 0
    for _ in range(max_rounds):
        need = k - have
        if need <= 0:
            break
        n_log = int(round(need * log_fraction))
        parts = []
        if need - n_log > 0:
            parts.append(space.sample_ball(rng, x, radius, need - n_log))
        if n_log > 0:
            parts.append(space.sample_ball(rng, x, radius, n_log, radial="log", floor=floor))
        P = restrict(np.vstack(parts), relative)
        if len(P):
            P = P[space.contains(P) & (space.metric(P, x) <= radius)]
        if len(P):
            out.append(P)
            have += len(P)
    if not out:
        return np.empty((0, x.size))
    return np.vstack(out)[:k]


def in_box(rng, box, k, relative=None, space=None):
    """Uniform points of a coordinate box, optionally restricted."""
    box = np.asarray(box, dtype=float)
    P = rng.uniform(box[:, 0], box[:, 1], size=(k, box.shape[0]))
    P = restrict(P, relative)
    if space is not None and len(P):
        P = P[space.contains(P)]
    return P

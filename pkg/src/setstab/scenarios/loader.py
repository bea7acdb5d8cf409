"""Scenario files in JSON.

Maps are given either as ``{"builtin": "<name>"}`` (a function from
:data:`setstab.scenarios.builtin.FUNCTIONS`) or as polynomial
coefficient tables ``{"polynomial": [[coef, [e1, ..., en]], ...]}``;
a vector field lists one table per component. Sets are
``{"point": [...]}``, ``{"zero": [i, ...]}`` (coordinate subspace,
0-based indices, sampled over the scenario box) or ``{"whole": true}``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..core import (ControlAffineSystem, InputError, PassiveSystem, SmoothField,
                    SmoothScalar, coordinate_subspace, euclidean, output_feedback,
                    point_set, polar_space, whole_space)
from .base import Scenario

KEYS = {"name", "description", "n", "box", "space", "field", "g", "h", "V", "r",
        "feedback", "Gamma", "O", "V0", "S_prime", "settings", "expected", "invented",
        "x0", "cascade", "tags"}


def _monomial(x, exps):
    term = 1.0
    for i, e in enumerate(exps):
        if e:
            term = term * (x[i] if e == 1 else x[i] ** int(e))
    return term


def _check_table(table, n, where):
    if not isinstance(table, list):
        raise InputError(f"{where}: polynomial table must be a list")
    out = []
    for entry in table:
        if (not isinstance(entry, (list, tuple)) or len(entry) != 2
                or not isinstance(entry[1], (list, tuple)) or len(entry[1]) != n):
            raise InputError(f"{where}: each term is [coef, [e1..e{n}]]")
        exps = [int(e) for e in entry[1]]
        if any(e < 0 for e in exps) or any(e != float(f) for e, f in zip(exps, entry[1])):
            raise InputError(f"{where}: exponents must be nonnegative integers")
        out.append((float(entry[0]), exps))
    return out


def polynomial_scalar(table, n):
    """Generic callable for ``sum coef * prod x_i**e_i``."""
    terms = _check_table(table, n, "polynomial")

    def fn(x):
        acc = 0.0 * x[0]
        for c, exps in terms:
            acc = acc + c * _monomial(x, exps)
        return acc
    return fn


def polynomial_field(tables, n):
    comps = [polynomial_scalar(t, n) for t in tables]

    def fn(x):
        return [c(x) for c in comps]
    return fn


def _builtin(name):
    from .builtin import FUNCTIONS
    if name not in FUNCTIONS:
        raise InputError(f"unknown builtin function {name!r}")
    return FUNCTIONS[name]


def _scalar_fn(spec, n, where):
    if not isinstance(spec, dict):
        raise InputError(f"{where}: expected an object")
    if "builtin" in spec:
        return _builtin(spec["builtin"])
    if "polynomial" in spec:
        return polynomial_scalar(spec["polynomial"], n)
    raise InputError(f"{where}: expected 'builtin' or 'polynomial'")


def _field_fn(spec, n, where, m=None):
    m = n if m is None else m
    if not isinstance(spec, dict):
        raise InputError(f"{where}: expected an object")
    if "builtin" in spec:
        return _builtin(spec["builtin"])
    if "polynomial" in spec:
        tables = spec["polynomial"]
        if not isinstance(tables, list) or len(tables) != m:
            raise InputError(f"{where}: need {m} component tables")
        return polynomial_field(tables, n)
    raise InputError(f"{where}: expected 'builtin' or 'polynomial'")


def _set(spec, n, box, space, where):
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise InputError(f"{where}: expected an object")
    name = spec.get("name")
    if "point" in spec:
        p = np.asarray(spec["point"], dtype=float)
        if p.shape != (n,):
            raise InputError(f"{where}: point must have {n} coordinates")
        return point_set(p, space=space, name=name)
    if "zero" in spec:
        idx = [int(i) for i in spec["zero"]]
        if any(i < 0 or i >= n for i in idx):
            raise InputError(f"{where}: coordinate index out of range")
        return coordinate_subspace(idx, n, box, name=name, space=space)
    if spec.get("whole"):
        return whole_space(n, box)
    raise InputError(f"{where}: expected 'point', 'zero' or 'whole'")


def from_dict(d: dict) -> Scenario:
    """Build a :class:`Scenario` from the parsed JSON object."""
    if not isinstance(d, dict):
        raise InputError("scenario file must hold a JSON object")
    unknown = set(d) - KEYS
    if unknown:
        raise InputError(f"unknown scenario keys: {sorted(unknown)}")
    for k in ("name", "n", "box", "Gamma"):
        if k not in d:
            raise InputError(f"scenario file lacks {k!r}")
    n = int(d["n"])
    box = d["box"]
    if (not isinstance(box, list) or len(box) != n
            or any(len(b) != 2 or not b[0] < b[1] for b in box)):
        raise InputError(f"box must list {n} increasing (lo, hi) pairs")
    space = {"euclidean": euclidean(n), "polar": polar_space()}.get(d.get("space", "euclidean"))
    if space is None or space.n != n:
        raise InputError("space must be 'euclidean' or 'polar' (n = 3)")
    fname = d["name"]
    ps = field = fb = None
    if "g" in d or "h" in d or "V" in d:
        for k in ("field", "g", "h", "V"):
            if k not in d:
                raise InputError(f"a passive system needs {k!r}")
        if len(d["g"]) != len(d["h"]):
            raise InputError("g and h must have the same length")
        f = SmoothField(_field_fn(d["field"], n, "field"), n, name=f"{fname}.f", space=space)
        g = tuple(SmoothField(_field_fn(s, n, f"g[{i}]"), n, name=f"g{i + 1}", space=space)
                  for i, s in enumerate(d["g"]))
        h = tuple(SmoothScalar(_scalar_fn(s, n, f"h[{i}]"), n, name=f"h{i + 1}")
                  for i, s in enumerate(d["h"]))
        sys = ControlAffineSystem(f, g, h, space=space, name=fname)
        ps = PassiveSystem(sys, SmoothScalar(_scalar_fn(d["V"], n, "V"), n, name="V"),
                           r=int(d.get("r", 2)))
        fbs = d.get("feedback", "output")
        if fbs == "output":
            fb = output_feedback(sys)
        elif isinstance(fbs, dict) and "gain" in fbs:
            fb = output_feedback(sys, float(fbs["gain"]))
        elif fbs is not None:
            raise InputError("feedback must be 'output', {'gain': k} or null")
    elif "field" in d:
        field = SmoothField(_field_fn(d["field"], n, "field"), n, name=fname, space=space)
    else:
        raise InputError("scenario needs 'field' (and optionally g, h, V)")
    cascade = None
    if d.get("cascade") is not None:
        c = d["cascade"]
        n1, n2 = int(c["n1"]), int(c["n2"])
        if n1 + n2 != n:
            raise InputError("cascade n1 + n2 must equal n")
        cascade = {"fxy": _field_fn(c["fxy"], n, "cascade.fxy", m=n1),
                   "gy": _field_fn(c["gy"], n2, "cascade.gy"), "n1": n1, "n2": n2,
                   "Gamma_x": _set(c["Gamma_x"], n1, box[:n1], None, "cascade.Gamma_x"),
                   "box_x": tuple(map(tuple, box[:n1])), "box_y": tuple(map(tuple, box[n1:]))}
    x0 = d.get("x0")
    if x0 is not None and len(x0) != n:
        raise InputError(f"x0 must have {n} entries")
    return Scenario(
        name=fname, description=d.get("description", ""), box=box, ps=ps, field=field,
        Gamma=_set(d["Gamma"], n, box, space, "Gamma"),
        O=_set(d.get("O"), n, box, space, "O"),
        V0=_set(d.get("V0"), n, box, space, "V0"),
        S_prime=_set(d.get("S_prime"), n, box, space, "S_prime"),
        feedback=fb, expected=dict(d.get("expected", {})),
        settings=dict(d.get("settings", {})), invented=bool(d.get("invented", False)),
        tags=tuple(d.get("tags", ())), cascade=cascade,
        x0=None if x0 is None else tuple(float(v) for v in x0))


def load_file(path) -> Scenario:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from exc
    try:
        return from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: {exc}") from exc

"""The :class:`Scenario` record and the name registry."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from ..core import (ClosedSetSpec, FeedbackLaw, InputError, PassiveSystem, SmoothField,
                    close_loop, zero_feedback)


@dataclass(frozen=True)
class Scenario:
    """A system with the sets the checks are run against.

    ``ps`` is ``None`` for plain (uncontrolled) fields; then ``field``
    is the system. ``expected`` maps check names to the outcome a fresh
    run under default settings must reproduce. ``settings`` holds
    per-check overrides (horizons, neighbourhoods) that keep the
    regression at desk scale.
    """

    name: str
    description: str
    box: tuple
    Gamma: ClosedSetSpec
    ps: Optional[PassiveSystem] = None
    field: Optional[SmoothField] = None
    O: Optional[ClosedSetSpec] = None
    V0: Optional[ClosedSetSpec] = None
    S_prime: Optional[ClosedSetSpec] = None
    feedback: Optional[FeedbackLaw] = None
    expected: dict = dc_field(default_factory=dict)
    settings: dict = dc_field(default_factory=dict)
    invented: bool = False
    tags: tuple = ()
    cascade: Optional[dict] = None
    x0: Optional[tuple] = None

    def __post_init__(self):
        if self.ps is None and self.field is None:
            raise InputError(f"scenario {self.name}: needs a passive system or a field")
        object.__setattr__(self, "box", tuple(tuple(map(float, b)) for b in self.box))

    @property
    def n(self):
        return self.ps.sys.n if self.ps is not None else self.field.n

    @property
    def space(self):
        return self.ps.sys.space if self.ps is not None else self.field.space

    @property
    def box_array(self):
        return np.asarray(self.box, dtype=float)

    def open_loop(self) -> SmoothField:
        if self.ps is None:
            return self.field
        return close_loop(self.ps, zero_feedback(self.ps.sys.m))

    def closed_loop(self) -> SmoothField:
        """The field the stability checks run on: closed loop if a feedback exists."""
        if self.ps is None:
            return self.field
        if self.feedback is None:
            return self.open_loop()
        return close_loop(self.ps, self.feedback)

    def setting(self, key, default=None):
        return self.settings.get(key, default)


_REGISTRY: dict = {}
_ALIASES: dict = {}


def register(name, factory: Callable[[], Scenario], aliases=()):
    _REGISTRY[name] = factory
    for a in aliases:
        _ALIASES[a] = name


def names():
    return sorted(_REGISTRY)


def load(name) -> Scenario:
    key = _ALIASES.get(name, name)
    if key not in _REGISTRY:
        raise InputError(f"unknown scenario {name!r}; known: {', '.join(names())}")
    return _REGISTRY[key]()

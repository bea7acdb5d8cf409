"""Numerical checks of set stability, reduction and detectability for passive systems."""
from .core import (ClosedSetSpec, ControlAffineSystem, FeedbackLaw, InputError, PassiveSystem,
                   SmoothField, SmoothScalar, Trajectory, Verdict)
from .integrate import BACKEND, DEFAULT, IntegratorConfig, integrate

__version__ = "0.1.0"

__all__ = ["ClosedSetSpec", "ControlAffineSystem", "FeedbackLaw", "InputError",
           "PassiveSystem", "SmoothField", "SmoothScalar", "Trajectory", "Verdict",
           "BACKEND", "DEFAULT", "IntegratorConfig", "integrate", "__version__"]

"""Elementary functions that work on floats, numpy arrays and the
package's derivative carriers.

User-supplied vector fields and scalars should use these instead of
``math``/``numpy`` so that the same definition can be evaluated
numerically, differentiated in forward mode, expanded as a Taylor jet
along a flow and traced into an op-tape for the compiled integrator.

Any object exposing a method of the same name (``sin``, ``cos``, ...)
is dispatched to that method.
"""
import math

import numpy as np

_SCALARS = (float, int)


def _dispatch(name, npfunc, mathfunc):
    def func(x):
        if isinstance(x, _SCALARS):
            return mathfunc(x)
        if isinstance(x, (np.ndarray, np.generic)):
            return npfunc(x)
        return getattr(x, name)()
    func.__name__ = name
    return func


sin = _dispatch("sin", np.sin, math.sin)
cos = _dispatch("cos", np.cos, math.cos)
exp = _dispatch("exp", np.exp, math.exp)
log = _dispatch("log", np.log, math.log)
sqrt = _dispatch("sqrt", np.sqrt, math.sqrt)
tanh = _dispatch("tanh", np.tanh, math.tanh)


def _flat_exp_scalar(x):
    if x == 0.0:
        return 0.0
    return math.exp(-1.0 / (x * x))


def _flat_exp_array(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nz = x != 0.0
    out[nz] = np.exp(-1.0 / (x[nz] * x[nz]))
    return out


def flat_exp(x):
    """``exp(-1/x**2)`` extended by 0 at ``x == 0``.

    The extension is C-infinity with every derivative vanishing at the
    origin; derivative carriers honour that (all jet coefficients are 0
    when the base value is exactly 0).
    """
    if isinstance(x, _SCALARS):
        return _flat_exp_scalar(x)
    if isinstance(x, (np.ndarray, np.generic)):
        if np.ndim(x) == 0:
            return _flat_exp_scalar(float(x))
        return _flat_exp_array(x)
    return x.flat_exp()


__all__ = ["sin", "cos", "exp", "log", "sqrt", "tanh", "flat_exp"]

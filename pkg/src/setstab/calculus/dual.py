"""Tagged dual numbers for nested forward-mode differentiation.

Every call to :func:`jvp` draws a fresh tag. Tags only grow, so inside
a nested derivative the innermost perturbation always carries the
largest tag; arithmetic between two duals treats the one with the
smaller tag as a constant with respect to the larger. This avoids
perturbation confusion when derivative operators are composed
(Lie brackets of Lie brackets, Lie derivatives of those, ...).
"""
import itertools

import numpy as np

from .. import smath

_tags = itertools.count(1)


def new_tag():
    return next(_tags)


class Dual:
    __slots__ = ("tag", "p", "t")
    __array_ufunc__ = None  # make numpy scalars defer to the reflected ops

    def __init__(self, tag, primal, tangent):
        self.tag = tag
        self.p = primal
        self.t = tangent

    # lifting ---------------------------------------------------------------
    def _split(self, other):
        """Return (tag, a.p, a.t, b.p, b.t) for a binary op."""
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return self.tag, self.p, self.t, other.p, other.t
            if other.tag > self.tag:
                return other.tag, self, 0.0, other.p, other.t
        return self.tag, self.p, self.t, other, 0.0

    def __add__(self, o):
        tag, ap, at, bp, bt = self._split(o)
        return Dual(tag, ap + bp, at + bt)

    def __radd__(self, o):
        return Dual(self.tag, o + self.p, self.t)

    def __sub__(self, o):
        tag, ap, at, bp, bt = self._split(o)
        return Dual(tag, ap - bp, at - bt)

    def __rsub__(self, o):
        return Dual(self.tag, o - self.p, -self.t)

    def __mul__(self, o):
        tag, ap, at, bp, bt = self._split(o)
        return Dual(tag, ap * bp, at * bp + ap * bt)

    def __rmul__(self, o):
        return Dual(self.tag, o * self.p, o * self.t)

    def __truediv__(self, o):
        tag, ap, at, bp, bt = self._split(o)
        q = ap / bp
        return Dual(tag, q, (at - q * bt) / bp)

    def __rtruediv__(self, o):
        q = o / self.p
        return Dual(self.tag, q, -q * self.t / self.p)

    def __neg__(self):
        return Dual(self.tag, -self.p, -self.t)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if isinstance(k, Dual):
            return smath.exp(k * smath.log(self))
        if isinstance(k, int) or float(k).is_integer():
            k = int(k)
            if k == 0:
                return Dual(self.tag, self.p ** 0, 0.0)
            if k == 1:
                return self
            if k < 0:
                return 1.0 / self ** (-k)
            pk1 = self.p ** (k - 1)
            return Dual(self.tag, pk1 * self.p, k * pk1 * self.t)
        pk1 = self.p ** (k - 1)
        return Dual(self.tag, pk1 * self.p, k * pk1 * self.t)

    def __rpow__(self, base):
        return smath.exp(self * smath.log(base))

    # elementary functions ---------------------------------------------------
    def sin(self):
        return Dual(self.tag, smath.sin(self.p), smath.cos(self.p) * self.t)

    def cos(self):
        return Dual(self.tag, smath.cos(self.p), -smath.sin(self.p) * self.t)

    def exp(self):
        e = smath.exp(self.p)
        return Dual(self.tag, e, e * self.t)

    def log(self):
        return Dual(self.tag, smath.log(self.p), self.t / self.p)

    def sqrt(self):
        s = smath.sqrt(self.p)
        return Dual(self.tag, s, self.t / (2.0 * s))

    def tanh(self):
        th = smath.tanh(self.p)
        return Dual(self.tag, th, (1.0 - th * th) * self.t)

    def flat_exp(self):
        if isinstance(self.p, np.ndarray):
            # batched first-order evaluation; zero slope where the base is 0
            e = smath.flat_exp(self.p)
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = np.where(self.p == 0.0, 0.0, 2.0 * e / self.p ** 3)
            return Dual(self.tag, e, slope * self.t)
        if base_value(self.p) == 0.0:
            # flat at the origin: value and every derivative vanish
            return Dual(self.tag, smath.flat_exp(self.p), 0.0)
        e = smath.flat_exp(self.p)
        return Dual(self.tag, e, 2.0 * e / (self.p * self.p * self.p) * self.t)

    # comparisons look at the base value only --------------------------------
    def __lt__(self, o):
        return base_value(self) < base_value(o)

    def __le__(self, o):
        return base_value(self) <= base_value(o)

    def __gt__(self, o):
        return base_value(self) > base_value(o)

    def __ge__(self, o):
        return base_value(self) >= base_value(o)

    def __abs__(self):
        return -self if base_value(self) < 0 else self

    def __repr__(self):
        return f"Dual[{self.tag}]({self.p!r}, {self.t!r})"


def base_value(v):
    while isinstance(v, Dual):
        v = v.p
    return v


def tangent(y, tag):
    if isinstance(y, Dual) and y.tag == tag:
        return y.t
    return 0.0


def primal(y, tag):
    if isinstance(y, Dual) and y.tag == tag:
        return y.p
    return y


def jvp(fn, x, v):
    """Primal and directional derivative of ``fn`` at ``x`` along ``v``.

    ``fn`` may return a scalar or a sequence. Entries of ``x`` and ``v``
    may themselves be duals of outer (smaller) tags.
    """
    tag = new_tag()
    xd = [Dual(tag, xi, vi) for xi, vi in zip(x, v)]
    y = fn(xd)
    if isinstance(y, (list, tuple)):
        return [primal(c, tag) for c in y], [tangent(c, tag) for c in y]
    return primal(y, tag), tangent(y, tag)

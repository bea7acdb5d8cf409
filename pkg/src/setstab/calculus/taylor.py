"""Truncated univariate Taylor series (Taylor-mode arithmetic).

A :class:`Taylor` holds coefficients ``c[0..K]`` of ``t -> a(t)`` at
``t = 0``. Arithmetic and the elementary functions use the standard
coefficient recurrences, so ``q(flow(t, x))`` can be expanded exactly
up to order K without symbolic algebra.
"""
import math

import numpy as np


def _coeffs(v, K):
    if isinstance(v, Taylor):
        return v.c
    c = np.zeros(K + 1)
    c[0] = float(v)
    return c


class Taylor:
    __slots__ = ("c",)
    __array_ufunc__ = None

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def constant(cls, value, K):
        c = np.zeros(K + 1)
        c[0] = value
        return cls(c)

    @property
    def order(self):
        return self.c.size - 1

    def __len__(self):
        return self.c.size

    # arithmetic --------------------------------------------------------------
    def __add__(self, o):
        return Taylor(self.c + _coeffs(o, self.order))

    __radd__ = __add__

    def __sub__(self, o):
        return Taylor(self.c - _coeffs(o, self.order))

    def __rsub__(self, o):
        return Taylor(_coeffs(o, self.order) - self.c)

    def __neg__(self):
        return Taylor(-self.c)

    def __pos__(self):
        return self

    def __mul__(self, o):
        if not isinstance(o, Taylor):
            return Taylor(self.c * float(o))
        return Taylor(np.convolve(self.c, o.c)[: self.c.size])

    __rmul__ = __mul__

    def __truediv__(self, o):
        if not isinstance(o, Taylor):
            return Taylor(self.c / float(o))
        a, b = self.c, o.c
        if b[0] == 0.0:
            raise ZeroDivisionError("Taylor division by a series vanishing at 0")
        q = np.zeros_like(a)
        for k in range(a.size):
            q[k] = (a[k] - np.dot(q[:k], b[k:0:-1])) / b[0]
        return Taylor(q)

    def __rtruediv__(self, o):
        return Taylor(_coeffs(o, self.order)) / self

    def __pow__(self, k):
        if isinstance(k, Taylor):
            return (k * self.log()).exp()
        if isinstance(k, int) or float(k).is_integer():
            k = int(k)
            if k < 0:
                return 1.0 / self ** (-k)
            out = Taylor.constant(1.0, self.order)
            base = self
            while k:
                if k & 1:
                    out = out * base
                base = base * base
                k >>= 1
            return out
        return self._real_pow(float(k))

    def _real_pow(self, alpha):
        a = self.c
        if a[0] == 0.0:
            raise ZeroDivisionError("non-integer power of a series vanishing at 0")
        p = np.zeros_like(a)
        p[0] = a[0] ** alpha
        for k in range(1, a.size):
            j = np.arange(1, k + 1)
            p[k] = np.sum((alpha * j - (k - j)) * a[j] * p[k - j]) / (k * a[0])
        return Taylor(p)

    # elementary functions --------------------------------------------------
    def exp(self):
        a = self.c
        e = np.zeros_like(a)
        e[0] = math.exp(a[0])
        for k in range(1, a.size):
            j = np.arange(1, k + 1)
            e[k] = np.sum(j * a[j] * e[k - j]) / k
        return Taylor(e)

    def log(self):
        a = self.c
        out = np.zeros_like(a)
        out[0] = math.log(a[0])
        for k in range(1, a.size):
            j = np.arange(1, k)
            out[k] = (a[k] - np.sum(j * out[j] * a[k - j]) / k) / a[0]
        return Taylor(out)

    def _sincos(self):
        a = self.c
        s = np.zeros_like(a)
        c = np.zeros_like(a)
        s[0], c[0] = math.sin(a[0]), math.cos(a[0])
        for k in range(1, a.size):
            j = np.arange(1, k + 1)
            s[k] = np.sum(j * a[j] * c[k - j]) / k
            c[k] = -np.sum(j * a[j] * s[k - j]) / k
        return Taylor(s), Taylor(c)

    def sin(self):
        return self._sincos()[0]

    def cos(self):
        return self._sincos()[1]

    def sqrt(self):
        return self._real_pow(0.5)

    def tanh(self):
        e2 = (2.0 * self).exp()
        return (e2 - 1.0) / (e2 + 1.0)

    def flat_exp(self):
        if self.c[0] == 0.0:
            # exp(-1/a(t)^2) with a(0)=0 is flat at t=0
            return Taylor(np.zeros_like(self.c))
        return (-1.0 / (self * self)).exp()

    def __repr__(self):
        return f"Taylor({self.c!r})"

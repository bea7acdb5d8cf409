"""Trace generic field callables into a flat op-tape.

The compiled integrator evaluates fields from this tape without calling
back into Python. Tracing runs the callable once on :class:`Tracer`
inputs; any data-dependent branch raises :class:`TraceError` and the
field is then integrated by the pure-Python backend instead.
"""
import math
from dataclasses import dataclass

import numpy as np

CONST, INPUT, ADD, SUB, MUL, DIV, NEG, POWI, POW, SIN, COS, EXP, LOG, SQRT, \
    FLATEXP, TANH = range(16)


class TraceError(TypeError):
    pass


class _Builder:
    def __init__(self):
        self.ops, self.a, self.b, self.c = [], [], [], []
        self._consts = {}

    def emit(self, op, a=-1, b=-1, c=0.0):
        self.ops.append(op)
        self.a.append(a)
        self.b.append(b)
        self.c.append(c)
        return len(self.ops) - 1

    def const(self, v):
        v = float(v)
        key = v.hex()
        if key not in self._consts:
            self._consts[key] = self.emit(CONST, c=v)
        return self._consts[key]


class Tracer:
    __slots__ = ("bld", "idx")
    __array_ufunc__ = None

    def __init__(self, bld, idx):
        self.bld = bld
        self.idx = idx

    def _arg(self, o):
        if isinstance(o, Tracer):
            return o.idx
        if isinstance(o, (int, float, np.number)):
            return self.bld.const(o)
        raise TraceError(f"cannot trace operand of type {type(o).__name__}")

    def _new(self, op, a=-1, b=-1, c=0.0):
        return Tracer(self.bld, self.bld.emit(op, a, b, c))

    def __add__(self, o):
        return self._new(ADD, self.idx, self._arg(o))

    def __radd__(self, o):
        return self._new(ADD, self._arg(o), self.idx)

    def __sub__(self, o):
        return self._new(SUB, self.idx, self._arg(o))

    def __rsub__(self, o):
        return self._new(SUB, self._arg(o), self.idx)

    def __mul__(self, o):
        return self._new(MUL, self.idx, self._arg(o))

    def __rmul__(self, o):
        return self._new(MUL, self._arg(o), self.idx)

    def __truediv__(self, o):
        return self._new(DIV, self.idx, self._arg(o))

    def __rtruediv__(self, o):
        return self._new(DIV, self._arg(o), self.idx)

    def __neg__(self):
        return self._new(NEG, self.idx)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if isinstance(k, Tracer):
            return (k * self.log()).exp()
        if float(k).is_integer():
            return self._new(POWI, self.idx, int(k))
        return self._new(POW, self.idx, self.bld.const(k))

    def __rpow__(self, base):
        return (self * math.log(base)).exp()

    def sin(self):
        return self._new(SIN, self.idx)

    def cos(self):
        return self._new(COS, self.idx)

    def exp(self):
        return self._new(EXP, self.idx)

    def log(self):
        return self._new(LOG, self.idx)

    def sqrt(self):
        return self._new(SQRT, self.idx)

    def tanh(self):
        return self._new(TANH, self.idx)

    def flat_exp(self):
        return self._new(FLATEXP, self.idx)

    def __bool__(self):
        raise TraceError("data-dependent branching cannot be traced")

    def _cmp(self, o):
        raise TraceError("comparisons cannot be traced")

    __lt__ = __le__ = __gt__ = __ge__ = _cmp

    def __abs__(self):
        raise TraceError("abs cannot be traced")


@dataclass(frozen=True)
class Tape:
    n: int
    ops: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    out: np.ndarray

    def __len__(self):
        return self.ops.size


def trace_field(fn, n):
    bld = _Builder()
    xs = [Tracer(bld, bld.emit(INPUT, a=i)) for i in range(n)]
    try:
        outs = list(fn(xs))
    except TraceError:
        raise
    except Exception as exc:  # the callable used something we cannot record
        raise TraceError(str(exc)) from exc
    if len(outs) != n:
        raise TraceError(f"field returned {len(outs)} components, expected {n}")
    idx = []
    for o in outs:
        if isinstance(o, Tracer):
            idx.append(o.idx)
        elif isinstance(o, (int, float, np.number)):
            idx.append(bld.const(o))
        else:
            raise TraceError(f"unsupported output type {type(o).__name__}")
    return Tape(n, np.asarray(bld.ops, dtype=np.int32),
                np.asarray(bld.a, dtype=np.int32), np.asarray(bld.b, dtype=np.int32),
                np.asarray(bld.c, dtype=np.float64), np.asarray(idx, dtype=np.int32))


def eval_tape(tape, x):
    """Reference evaluator (pure Python); mirrors the compiled one."""
    reg = [0.0] * len(tape)
    ops, a, b, c = tape.ops, tape.a, tape.b, tape.c
    for i in range(len(tape)):
        op = ops[i]
        if op == CONST:
            v = c[i]
        elif op == INPUT:
            v = float(x[a[i]])
        elif op == ADD:
            v = reg[a[i]] + reg[b[i]]
        elif op == SUB:
            v = reg[a[i]] - reg[b[i]]
        elif op == MUL:
            v = reg[a[i]] * reg[b[i]]
        elif op == DIV:
            v = reg[a[i]] / reg[b[i]]
        elif op == NEG:
            v = -reg[a[i]]
        elif op == POWI:
            v = _powi(reg[a[i]], int(b[i]))
        elif op == POW:
            v = reg[a[i]] ** reg[b[i]]
        elif op == SIN:
            v = math.sin(reg[a[i]])
        elif op == COS:
            v = math.cos(reg[a[i]])
        elif op == EXP:
            v = math.exp(reg[a[i]])
        elif op == LOG:
            v = math.log(reg[a[i]])
        elif op == SQRT:
            v = math.sqrt(reg[a[i]])
        elif op == TANH:
            v = math.tanh(reg[a[i]])
        elif op == FLATEXP:
            u = reg[a[i]]
            v = 0.0 if u == 0.0 else math.exp(-1.0 / (u * u))
        else:
            raise ValueError(f"bad opcode {op}")
        reg[i] = v
    return np.array([reg[j] for j in tape.out])


def _powi(v, k):
    if k < 0:
        return 1.0 / _powi(v, -k)
    out = 1.0
    while k:
        if k & 1:
            out *= v
        v *= v
        k >>= 1
    return out

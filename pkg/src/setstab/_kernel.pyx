# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) integrator over a traced op-tape."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, log, sqrt, tanh, pow, fabs, isfinite, INFINITY
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

DEF CONST = 0
DEF INPUT = 1
DEF ADD = 2
DEF SUB = 3
DEF MUL = 4
DEF DIV = 5
DEF NEG = 6
DEF POWI = 7
DEF POW = 8
DEF SIN = 9
DEF COS = 10
DEF EXP = 11
DEF LOG = 12
DEF SQRT = 13
DEF FLATEXP = 14
DEF TANH = 15

# status codes shared with the Python driver
DEF ST_OK = 0
DEF ST_ESCAPED = 1
DEF ST_COLLAPSED = 2
DEF ST_NAN = 3
DEF ST_MAX_STEPS = 4


cdef struct TapeC:
    int len
    int n
    const int* ops
    const int* a
    const int* b
    const double* c
    const int* out
    double* reg


cdef inline double _powi(double v, int k) noexcept nogil:
    cdef double r = 1.0
    cdef bint inv = k < 0
    if inv:
        k = -k
    while k:
        if k & 1:
            r *= v
        v *= v
        k >>= 1
    return 1.0 / r if inv else r


cdef void _eval(TapeC* t, const double* x, double* dx) noexcept nogil:
    cdef int i, op
    cdef double u
    cdef double* reg = t.reg
    for i in range(t.len):
        op = t.ops[i]
        if op == CONST:
            reg[i] = t.c[i]
        elif op == INPUT:
            reg[i] = x[t.a[i]]
        elif op == ADD:
            reg[i] = reg[t.a[i]] + reg[t.b[i]]
        elif op == SUB:
            reg[i] = reg[t.a[i]] - reg[t.b[i]]
        elif op == MUL:
            reg[i] = reg[t.a[i]] * reg[t.b[i]]
        elif op == DIV:
            reg[i] = reg[t.a[i]] / reg[t.b[i]]
        elif op == NEG:
            reg[i] = -reg[t.a[i]]
        elif op == POWI:
            reg[i] = _powi(reg[t.a[i]], t.b[i])
        elif op == POW:
            reg[i] = pow(reg[t.a[i]], reg[t.b[i]])
        elif op == SIN:
            reg[i] = sin(reg[t.a[i]])
        elif op == COS:
            reg[i] = cos(reg[t.a[i]])
        elif op == EXP:
            reg[i] = exp(reg[t.a[i]])
        elif op == LOG:
            reg[i] = log(reg[t.a[i]])
        elif op == SQRT:
            reg[i] = sqrt(reg[t.a[i]])
        elif op == TANH:
            reg[i] = tanh(reg[t.a[i]])
        elif op == FLATEXP:
            u = reg[t.a[i]]
            reg[i] = 0.0 if u == 0.0 else exp(-1.0 / (u * u))
    for i in range(t.n):
        dx[i] = reg[t.out[i]]


def eval_tape(tape, double[::1] x):
    """Evaluate a tape once (used by tests to compare with the Python evaluator)."""
    cdef int[::1] ops = tape.ops, a = tape.a, b = tape.b, out = tape.out
    cdef double[::1] c = tape.c
    cdef TapeC t
    cdef cnp.ndarray[double, ndim=1] dx = np.empty(tape.n)
    cdef cnp.ndarray[double, ndim=1] reg = np.empty(max(len(tape), 1))
    t.len = len(tape)
    t.n = tape.n
    t.ops = &ops[0]
    t.a = &a[0]
    t.b = &b[0]
    t.c = &c[0]
    t.out = &out[0]
    t.reg = &reg[0]
    _eval(&t, &x[0], &dx[0])
    return dx


# Dormand-Prince coefficients
DEF C2 = 0.2
DEF C3 = 0.3
DEF C4 = 0.8
DEF C5 = 8.0 / 9.0
DEF A21 = 0.2
DEF A31 = 3.0 / 40.0
DEF A32 = 9.0 / 40.0
DEF A41 = 44.0 / 45.0
DEF A42 = -56.0 / 15.0
DEF A43 = 32.0 / 9.0
DEF A51 = 19372.0 / 6561.0
DEF A52 = -25360.0 / 2187.0
DEF A53 = 64448.0 / 6561.0
DEF A54 = -212.0 / 729.0
DEF A61 = 9017.0 / 3168.0
DEF A62 = -355.0 / 33.0
DEF A63 = 46732.0 / 5247.0
DEF A64 = 49.0 / 176.0
DEF A65 = -5103.0 / 18656.0
DEF B1 = 35.0 / 384.0
DEF B3 = 500.0 / 1113.0
DEF B4 = 125.0 / 192.0
DEF B5 = -2187.0 / 6784.0
DEF B6 = 11.0 / 84.0
DEF E1 = 71.0 / 57600.0
DEF E3 = -71.0 / 16695.0
DEF E4 = 71.0 / 1920.0
DEF E5 = -17253.0 / 339200.0
DEF E6 = 22.0 / 525.0
DEF E7 = -1.0 / 40.0

DEF BETA = 0.04
DEF EXPO1 = 0.2 - BETA * 0.75
DEF SAFE = 0.9
DEF FACC1 = 5.0    # 1 / smallest step ratio 0.2
DEF FACC2 = 0.1    # 1 / largest step ratio 10


cdef double _norm_sc(int n, const double* v, const double* x, double rtol, double atol) noexcept nogil:
    cdef double s = 0.0, sc
    cdef int i
    for i in range(n):
        sc = atol + rtol * fabs(x[i])
        s += (v[i] / sc) * (v[i] / sc)
    return sqrt(s / n)


cdef struct Rec:
    double* buf
    int cap
    int count
    int width


cdef int _push(Rec* r, double t, const double* x) noexcept nogil:
    cdef int i
    cdef double* nb
    if r.count == r.cap:
        r.cap = r.cap * 2
        nb = <double*> realloc(r.buf, r.cap * r.width * sizeof(double))
        if nb == NULL:
            return -1
        r.buf = nb
    r.buf[r.count * r.width] = t
    for i in range(r.width - 1):
        r.buf[r.count * r.width + 1 + i] = x[i]
    r.count += 1
    return 0


def dopri5(tape, double[::1] x0, double t_end, double rtol, double atol,
           double max_step, double r_max, long max_steps, int stride,
           double t_record=0.0):
    """Integrate ``x' = tape(x)`` from 0 to ``t_end``.

    Records every ``stride``-th accepted step with time >= ``t_record``
    (plus the initial and final points). Returns
    ``(data, steps, rejected, status)`` where ``data`` has rows
    ``[t, x_1, ..., x_n]``.
    """
    cdef int n = tape.n
    cdef int[::1] ops = tape.ops, a = tape.a, b = tape.b, out = tape.out
    cdef double[::1] c = tape.c
    cdef TapeC t
    cdef cnp.ndarray[double, ndim=1] regarr = np.empty(max(len(tape), 1))
    cdef cnp.ndarray[double, ndim=2] work = np.zeros((11, n))
    cdef double* x = &work[0, 0]
    cdef double* k1 = &work[1, 0]
    cdef double* k2 = &work[2, 0]
    cdef double* k3 = &work[3, 0]
    cdef double* k4 = &work[4, 0]
    cdef double* k5 = &work[5, 0]
    cdef double* k6 = &work[6, 0]
    cdef double* k7 = &work[7, 0]
    cdef double* y = &work[8, 0]
    cdef double* xn = &work[9, 0]
    cdef double* err = &work[10, 0]
    cdef Rec rec
    cdef double[:, ::1] dv
    cdef int i, j, status = ST_OK, nan_retries = 0
    cdef long steps = 0, rejected = 0, accepted = 0
    cdef double tt = 0.0, h, hnew, d0, d1, d2, h0, h1, e, sc, fac, fac11
    cdef double facold = 1e-4, nrm, hmin = 1e-13 * t_end
    cdef bint last_rejected = False, done = False

    if n == 0:
        raise ValueError("empty state")
    t.len = len(tape)
    t.n = n
    t.ops = &ops[0]
    t.a = &a[0]
    t.b = &b[0]
    t.c = &c[0]
    t.out = &out[0]
    t.reg = &regarr[0]

    rec.width = n + 1
    rec.cap = 256
    rec.count = 0
    rec.buf = <double*> malloc(rec.cap * rec.width * sizeof(double))
    if rec.buf == NULL:
        raise MemoryError()

    with nogil:
        for i in range(n):
            x[i] = x0[i]
        _push(&rec, 0.0, x)
        _eval(&t, x, k1)
        for i in range(n):
            if not isfinite(k1[i]):
                status = ST_NAN
        if status == ST_OK:
            # initial step size (Hairer & Wanner's heuristic)
            d0 = _norm_sc(n, x, x, rtol, atol)
            d1 = _norm_sc(n, k1, x, rtol, atol)
            if d0 < 1e-5 or d1 < 1e-5:
                h0 = 1e-6
            else:
                h0 = 0.01 * d0 / d1
            h0 = min(h0, max_step, t_end)
            for i in range(n):
                y[i] = x[i] + h0 * k1[i]
            _eval(&t, y, k2)
            for i in range(n):
                err[i] = k2[i] - k1[i]
            d2 = _norm_sc(n, err, x, rtol, atol) / h0
            if max(d1, d2) <= 1e-15:
                h1 = max(1e-6, h0 * 1e-3)
            else:
                h1 = pow(0.01 / max(d1, d2), 0.2)
            h = min(100.0 * h0, h1, max_step, t_end)

        while status == ST_OK and not done:
            if steps >= max_steps:
                status = ST_MAX_STEPS
                break
            if h < hmin:
                status = ST_COLLAPSED
                break
            if tt + 1.01 * h >= t_end:
                h = t_end - tt
                done = True
            steps += 1
            for i in range(n):
                y[i] = x[i] + h * A21 * k1[i]
            _eval(&t, y, k2)
            for i in range(n):
                y[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i])
            _eval(&t, y, k3)
            for i in range(n):
                y[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            _eval(&t, y, k4)
            for i in range(n):
                y[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            _eval(&t, y, k5)
            for i in range(n):
                y[i] = x[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                   + A64 * k4[i] + A65 * k5[i])
            _eval(&t, y, k6)
            for i in range(n):
                xn[i] = x[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                    + B5 * k5[i] + B6 * k6[i])
            _eval(&t, xn, k7)
            e = 0.0
            for i in range(n):
                err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                              + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * max(fabs(x[i]), fabs(xn[i]))
                e += (err[i] / sc) * (err[i] / sc)
            e = sqrt(e / n)
            if not isfinite(e):
                # a stage left the field's domain: retry with a much
                # smaller step, give up after repeated failures
                nan_retries += 1
                if nan_retries > 40:
                    status = ST_NAN
                    break
                rejected += 1
                done = False
                last_rejected = True
                h = h * 0.2
                continue
            fac11 = pow(e, EXPO1)
            fac = fac11 / pow(facold, BETA)
            fac = max(FACC2, min(FACC1, fac / SAFE))
            hnew = h / fac
            if e <= 1.0:
                facold = max(e, 1e-4)
                nan_retries = 0
                tt = t_end if done else tt + h
                nrm = 0.0
                for i in range(n):
                    x[i] = xn[i]
                    k1[i] = k7[i]
                    nrm += x[i] * x[i]
                    if not isfinite(x[i]) or not isfinite(k1[i]):
                        status = ST_NAN
                accepted += 1
                if hnew > max_step:
                    hnew = max_step
                if last_rejected and hnew > h:
                    hnew = h
                last_rejected = False
                if status == ST_OK and sqrt(nrm) > r_max:
                    status = ST_ESCAPED
                if done or status != ST_OK or (tt >= t_record and accepted % stride == 0):
                    if _push(&rec, tt, x) != 0:
                        status = ST_MAX_STEPS
                        break
                h = hnew
            else:
                rejected += 1
                done = False
                last_rejected = True
                h = h / min(FACC1, fac11 / SAFE)

        if status != ST_OK and rec.count > 0:
            # make sure the last accepted state is in the record
            if rec.buf[(rec.count - 1) * rec.width] != tt:
                _push(&rec, tt, x)

    data = np.empty((rec.count, rec.width))
    dv = data
    for i in range(rec.count):
        for j in range(rec.width):
            dv[i, j] = rec.buf[i * rec.width + j]
    free(rec.buf)
    return data, steps, rejected, status

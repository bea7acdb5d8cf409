"""Pure-Python Dormand-Prince 5(4); same step control as the compiled kernel."""
import math

import numpy as np

ST_OK, ST_ESCAPED, ST_COLLAPSED, ST_NAN, ST_MAX_STEPS = range(5)

A21 = 0.2
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
SAFE = 0.9
FACC1 = 5.0
FACC2 = 0.1


def _norm_sc(v, x, rtol, atol):
    sc = atol + rtol * np.abs(x)
    return math.sqrt(float(np.mean((v / sc) ** 2)))


def dopri5(rhs, x0, t_end, rtol, atol, max_step, r_max, max_steps, stride,
           t_record=0.0):
    """See :func:`setstab._kernel.dopri5`; ``rhs`` maps an array to an array."""
    x = np.array(x0, dtype=float)
    n = x.size
    rows = [np.r_[0.0, x]]
    status = ST_OK
    steps = rejected = accepted = 0
    tt = 0.0
    facold = 1e-4
    hmin = 1e-13 * t_end
    last_rejected = done = False
    nan_retries = 0

    with np.errstate(all="ignore"):
        k1 = rhs(x)
        if not np.all(np.isfinite(k1)):
            status = ST_NAN
        else:
            d0 = _norm_sc(x, x, rtol, atol)
            d1 = _norm_sc(k1, x, rtol, atol)
            h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
            h0 = min(h0, max_step, t_end)
            k2 = rhs(x + h0 * k1)
            d2 = _norm_sc(k2 - k1, x, rtol, atol) / h0
            if max(d1, d2) <= 1e-15:
                h1 = max(1e-6, h0 * 1e-3)
            else:
                h1 = (0.01 / max(d1, d2)) ** 0.2
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
            k2 = rhs(x + h * A21 * k1)
            k3 = rhs(x + h * (A31 * k1 + A32 * k2))
            k4 = rhs(x + h * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = rhs(x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = rhs(x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            xn = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            k7 = rhs(xn)
            err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            sc = atol + rtol * np.maximum(np.abs(x), np.abs(xn))
            e = math.sqrt(float(np.mean((err / sc) ** 2)))
            if not math.isfinite(e):
                nan_retries += 1
                if nan_retries > 40:
                    status = ST_NAN
                    break
                rejected += 1
                done = False
                last_rejected = True
                h *= 0.2
                continue
            fac11 = e ** EXPO1
            fac = fac11 / facold ** BETA
            fac = max(FACC2, min(FACC1, fac / SAFE))
            hnew = h / fac
            if e <= 1.0:
                facold = max(e, 1e-4)
                nan_retries = 0
                tt = t_end if done else tt + h
                x, k1 = xn, k7
                if not (np.all(np.isfinite(x)) and np.all(np.isfinite(k1))):
                    status = ST_NAN
                accepted += 1
                hnew = min(hnew, max_step)
                if last_rejected and hnew > h:
                    hnew = h
                last_rejected = False
                if status == ST_OK and float(np.linalg.norm(x)) > r_max:
                    status = ST_ESCAPED
                if done or status != ST_OK or (tt >= t_record and accepted % stride == 0):
                    rows.append(np.r_[tt, x])
                h = hnew
            else:
                rejected += 1
                done = False
                last_rejected = True
                h = h / min(FACC1, fac11 / SAFE)

    if status != ST_OK and rows[-1][0] != tt:
        rows.append(np.r_[tt, x])
    return np.array(rows), steps, rejected, status

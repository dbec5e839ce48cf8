"""Pure-Python master-equation propagator.

Reference implementation of the adaptive Dormand-Prince 5(4) integrator used
by :mod:`stirapsim.dynamics`; the compiled extension ``_kernel`` implements
the identical algorithm (same coefficients, same step control, same dense
interpolant) and is preferred at import time.  Times in us, drive terms in
cyclic MHz (converted to angular rad/us internally), decay rates in 1/us.

The right-hand side is

    d(rho)/dt = -i [H(t), rho] - damp * rho + sum_k rate_k rho[from,from] |to><to|

with H built from a static diagonal plus a list of driven coupling terms
``pi * om_field(t) * dip * exp(2i pi freq t)`` at [g, e] (+ h.c.), where the
two field envelopes are truncated Gaussians with a common peak.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi

# Dormand-Prince 5(4) tableau
_C = (0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_E = (
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
# dense-output polynomial, y(t + theta*h) = y + h * sum_s K_s * Q_s(theta)
_P = (
    (1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0),
    (0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0),
    (0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0),
    (0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0),
    (0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0),
)

_SAFETY = 0.9
_MAX_FACTOR = 10.0
_MIN_FACTOR = 0.2

BACKEND_NAME = "python"


def _envelope(t, center, peak, alpha, trunc):
    x = t - center
    if abs(x) > trunc:
        return 0.0
    return peak * math.exp(-alpha * x * x)


def _make_rhs(tab):
    n = tab.n
    diag = TWO_PI * np.asarray(tab.diag, dtype=float)
    idx = np.arange(n)
    m = len(tab.term_g)

    def rhs(t, y):
        om_p = _envelope(t, tab.pump_center, tab.peak, tab.alpha, tab.trunc)
        om_s = _envelope(t, tab.stokes_center, tab.peak, tab.alpha, tab.trunc)
        if tab.saturation > 0.0 and om_s != 0.0:
            om_s = tab.saturation * math.tanh(om_s / tab.saturation)
        h = np.zeros((n, n), dtype=complex)
        h[idx, idx] = diag
        for j in range(m):
            amp = om_p if tab.term_field[j] == 0 else om_s
            if amp == 0.0:
                continue
            w = math.pi * amp * tab.term_dip[j]
            ph = TWO_PI * tab.term_freq[j] * t
            z = complex(w * math.cos(ph), w * math.sin(ph))
            g, e = tab.term_g[j], tab.term_e[j]
            h[g, e] += z
            h[e, g] += z.conjugate()
        out = -1j * (h @ y - y @ h)
        out -= tab.damp * y
        for k in range(len(tab.chan_from)):
            out[tab.chan_to[k], tab.chan_to[k]] += tab.chan_rate[k] * y[tab.chan_from[k], tab.chan_from[k]]
        return out

    return rhs


def _rms(a):
    return math.sqrt(float(np.mean(np.abs(a) ** 2)))


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return _rms(err / scale)


def _initial_step(rhs, t0, y0, f0, span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, span)


def _sym(y):
    return 0.5 * (y + y.conj().T)


def integrate(tab, rho0, t0, t1, t_samples, rtol, atol):
    """Propagate ``rho0`` from t0 to t1, sampling at ``t_samples``.

    Returns ``(samples, status, t_fail)`` with status 0 on success and 1 on
    step-size underflow at time ``t_fail``.  Sample times must be sorted and
    lie within [t0, t1]; sampled matrices are re-symmetrized.
    """
    n = tab.n
    t_samples = np.asarray(t_samples, dtype=float)
    ns = len(t_samples)
    samples = np.empty((ns, n, n), dtype=complex)
    y = np.array(rho0, dtype=complex, copy=True)
    rhs = _make_rhs(tab)

    si = 0
    fuzz = 1e-12 * max(1.0, abs(t0))
    while si < ns and t_samples[si] <= t0 + fuzz:
        samples[si] = _sym(y)
        si += 1

    t = t0
    f0 = rhs(t0, y)
    h = _initial_step(rhs, t0, y, f0, t1 - t0, rtol, atol)
    k = [None] * 7

    while t < t1:
        hs = h
        if tab.cap > 0.0:
            if t + tab.cap < tab.cap_lo:
                hs = min(hs, tab.cap_lo - t)
            elif t <= tab.cap_hi:
                hs = min(hs, tab.cap)
        final = hs >= t1 - t
        if final:
            hs = t1 - t
        hmin = 16.0 * np.finfo(float).eps * max(abs(t), abs(t1))
        if not final and hs < hmin:
            return samples, 1, t

        k[0] = rhs(t, y)
        for s in range(1, 7):
            ys = y.copy()
            a_row = _A[s]
            for j in range(s):
                if a_row[j] != 0.0:
                    ys += (hs * a_row[j]) * k[j]
            k[s] = rhs(t + _C[s] * hs, ys)
        y_new = ys  # stage 7 input is the 5th-order solution
        err = np.zeros_like(y)
        for s in range(7):
            if _E[s] != 0.0:
                err += _E[s] * k[s]
        err *= hs
        norm = _error_norm(err, y, y_new, rtol, atol)

        if norm <= 1.0:
            t_new = t1 if final else t + hs
            fuzz = 1e-12 * max(1.0, abs(t_new))
            while si < ns and t_samples[si] <= t_new + fuzz:
                theta = min(max((t_samples[si] - t) / hs, 0.0), 1.0)
                ys = y.copy()
                for s in range(7):
                    p = _P[s]
                    q = theta * (p[0] + theta * (p[1] + theta * (p[2] + theta * p[3])))
                    if q != 0.0:
                        ys += (hs * q) * k[s]
                samples[si] = _sym(ys)
                si += 1
            y = _sym(y_new)
            t = t_new
            factor = _MAX_FACTOR if norm == 0.0 else min(_MAX_FACTOR, max(1.0, _SAFETY * norm**-0.2))
            h = hs * factor
        else:
            h = hs * max(_MIN_FACTOR, _SAFETY * norm**-0.2)
            if h < hmin:
                return samples, 1, t

    fuzz = 1e-12 * max(1.0, abs(t1))
    while si < ns and t_samples[si] <= t1 + fuzz:
        samples[si] = _sym(y)
        si += 1
    if si != ns:
        raise ValueError("sample times extend beyond the integration window")
    return samples, 0, math.nan

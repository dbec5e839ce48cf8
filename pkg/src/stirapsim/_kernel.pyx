# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled master-equation propagator.

Same algorithm as ``_kernel_py`` (Dormand-Prince 5(4), shared tableau, step
control, dense interpolant and re-symmetrization); kept in lockstep with it.
"""

import math

import numpy as np

from libc.math cimport cos, exp, fabs, sin, sqrt, tanh

BACKEND_NAME = "compiled"

cdef double TWO_PI = 6.283185307179586476925287
cdef double PI = 3.141592653589793238462643
cdef double EPS16 = 16.0 * 2.220446049250313e-16

cdef double SAFETY = 0.9
cdef double MAX_FACTOR = 10.0
cdef double MIN_FACTOR = 0.2

# error coefficients (5th minus embedded 4th order)
cdef double E0 = 71.0 / 57600.0
cdef double E2 = -71.0 / 16695.0
cdef double E3 = 71.0 / 1920.0
cdef double E4 = -17253.0 / 339200.0
cdef double E5 = 22.0 / 525.0
cdef double E6 = -1.0 / 40.0


cdef class _Model:
    cdef int n, m, nchan
    cdef double peak, alpha, c_p, c_s, trunc, sat
    cdef double cap, cap_lo, cap_hi
    cdef double[::1] diag_ang          # 2*pi * diag, rad/us
    cdef int[::1] tg, te, tf
    cdef double[::1] tdip, tfreq
    cdef int[::1] ch_from, ch_to
    cdef double[::1] ch_rate
    cdef double[:, ::1] damp
    cdef double complex[::1] hbuf


cdef _Model _build(object tab):
    cdef _Model mod = _Model()
    mod.n = tab.n
    mod.peak = tab.peak
    mod.alpha = tab.alpha
    mod.c_p = tab.pump_center
    mod.c_s = tab.stokes_center
    mod.trunc = tab.trunc
    mod.sat = tab.saturation
    mod.cap = tab.cap
    mod.cap_lo = tab.cap_lo
    mod.cap_hi = tab.cap_hi
    mod.diag_ang = TWO_PI * np.asarray(tab.diag, dtype=np.float64)
    mod.tg = tab.term_g
    mod.te = tab.term_e
    mod.tf = tab.term_field
    mod.tdip = tab.term_dip
    mod.tfreq = tab.term_freq
    mod.m = tab.term_g.shape[0]
    mod.ch_from = tab.chan_from
    mod.ch_to = tab.chan_to
    mod.ch_rate = tab.chan_rate
    mod.nchan = tab.chan_from.shape[0]
    mod.damp = tab.damp
    mod.hbuf = np.zeros(mod.n * mod.n, dtype=np.complex128)
    return mod


cdef inline double _env(double t, double center, double peak, double alpha, double trunc) nogil:
    cdef double x = t - center
    if fabs(x) > trunc:
        return 0.0
    return peak * exp(-alpha * x * x)


cdef void _rhs(_Model mod, double t, double complex[::1] y, double complex[::1] out):
    cdef int n = mod.n
    cdef int i, j, kk, g, e
    cdef double om_p, om_s, amp, w, ph
    cdef double complex z, acc
    cdef double complex[::1] h = mod.hbuf

    om_p = _env(t, mod.c_p, mod.peak, mod.alpha, mod.trunc)
    om_s = _env(t, mod.c_s, mod.peak, mod.alpha, mod.trunc)
    if mod.sat > 0.0 and om_s != 0.0:
        om_s = mod.sat * tanh(om_s / mod.sat)

    for i in range(n * n):
        h[i] = 0.0
    for i in range(n):
        h[i * n + i] = mod.diag_ang[i]
    for j in range(mod.m):
        amp = om_p if mod.tf[j] == 0 else om_s
        if amp == 0.0:
            continue
        w = PI * amp * mod.tdip[j]
        ph = TWO_PI * mod.tfreq[j] * t
        z = w * cos(ph) + 1j * (w * sin(ph))
        g = mod.tg[j]
        e = mod.te[j]
        h[g * n + e] = h[g * n + e] + z
        h[e * n + g] = h[e * n + g] + z.conjugate()

    for i in range(n):
        for j in range(n):
            acc = 0.0
            for kk in range(n):
                acc = acc + h[i * n + kk] * y[kk * n + j] - y[i * n + kk] * h[kk * n + j]
            out[i * n + j] = -1j * acc - mod.damp[i, j] * y[i * n + j]
    for kk in range(mod.nchan):
        i = mod.ch_to[kk]
        j = mod.ch_from[kk]
        out[i * n + i] = out[i * n + i] + mod.ch_rate[kk] * y[j * n + j]


cdef double _error_norm(double complex[::1] err, double complex[::1] y0,
                        double complex[::1] y1, double rtol, double atol):
    cdef int i, nn = err.shape[0]
    cdef double s = 0.0
    cdef double scale, q, a0, a1
    for i in range(nn):
        a0 = abs(y0[i])
        a1 = abs(y1[i])
        scale = atol + rtol * (a0 if a0 > a1 else a1)
        q = abs(err[i]) / scale
        s += q * q
    return sqrt(s / nn)


cdef double _rms_scaled(double complex[::1] a, double complex[::1] y0, double rtol, double atol):
    cdef int i, nn = a.shape[0]
    cdef double s = 0.0, q
    for i in range(nn):
        q = abs(a[i]) / (atol + rtol * abs(y0[i]))
        s += q * q
    return sqrt(s / nn)


def integrate(object tab, object rho0, double t0, double t1, object t_samples,
              double rtol, double atol):
    """Propagate rho0 over [t0, t1]; see ``_kernel_py.integrate``."""
    cdef _Model mod = _build(tab)
    cdef int n = mod.n
    cdef int nn = n * n
    cdef double[::1] ts = np.ascontiguousarray(t_samples, dtype=np.float64)
    cdef int ns = ts.shape[0]

    out_arr = np.empty((ns, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] samples = out_arr

    y_arr = np.array(rho0, dtype=np.complex128, copy=True).reshape(nn)
    cdef double complex[::1] y = y_arr
    cdef double complex[::1] ynew = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] ystage = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] err = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] k0 = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] k1 = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] k2 = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] k3 = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] k4 = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] k5 = np.empty(nn, dtype=np.complex128)
    cdef double complex[::1] k6 = np.empty(nn, dtype=np.complex128)

    cdef int si = 0, i, j, s
    cdef double t = t0, fuzz, h, hs, hmin, norm, t_new, theta, q, factor
    cdef double d0, d1, d2, h0, h1
    cdef bint final
    cdef double complex v

    fuzz = 1e-12 * (1.0 if fabs(t0) < 1.0 else fabs(t0))
    while si < ns and ts[si] <= t0 + fuzz:
        _store_sym(samples, si, y, n)
        si += 1

    # initial step selection (Hairer-style, mirrors the python kernel)
    _rhs(mod, t0, y, k0)
    d0 = _rms_scaled(y, y, rtol, atol)
    d1 = _rms_scaled(k0, y, rtol, atol)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    for i in range(nn):
        ystage[i] = y[i] + h0 * k0[i]
    _rhs(mod, t0 + h0, ystage, k1)
    for i in range(nn):
        err[i] = k1[i] - k0[i]
    d2 = _rms_scaled(err, y, rtol, atol) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = 1e-6 if 1e-6 > h0 * 1e-3 else h0 * 1e-3
    else:
        h1 = (0.01 / (d1 if d1 > d2 else d2)) ** 0.2
    h = min(100.0 * h0, h1, t1 - t0)

    while t < t1:
        hs = h
        if mod.cap > 0.0:
            if t + mod.cap < mod.cap_lo:
                if hs > mod.cap_lo - t:
                    hs = mod.cap_lo - t
            elif t <= mod.cap_hi:
                if hs > mod.cap:
                    hs = mod.cap
        final = hs >= t1 - t
        if final:
            hs = t1 - t
        hmin = EPS16 * (fabs(t) if fabs(t) > fabs(t1) else fabs(t1))
        if (not final) and hs < hmin:
            return out_arr, 1, t

        _rhs(mod, t, y, k0)
        for i in range(nn):
            ystage[i] = y[i] + hs * 0.2 * k0[i]
        _rhs(mod, t + 0.2 * hs, ystage, k1)
        for i in range(nn):
            ystage[i] = y[i] + hs * (0.075 * k0[i] + 0.225 * k1[i])
        _rhs(mod, t + 0.3 * hs, ystage, k2)
        for i in range(nn):
            ystage[i] = y[i] + hs * ((44.0 / 45.0) * k0[i] + (-56.0 / 15.0) * k1[i]
                                     + (32.0 / 9.0) * k2[i])
        _rhs(mod, t + 0.8 * hs, ystage, k3)
        for i in range(nn):
            ystage[i] = y[i] + hs * ((19372.0 / 6561.0) * k0[i] + (-25360.0 / 2187.0) * k1[i]
                                     + (64448.0 / 6561.0) * k2[i] + (-212.0 / 729.0) * k3[i])
        _rhs(mod, t + (8.0 / 9.0) * hs, ystage, k4)
        for i in range(nn):
            ystage[i] = y[i] + hs * ((9017.0 / 3168.0) * k0[i] + (-355.0 / 33.0) * k1[i]
                                     + (46732.0 / 5247.0) * k2[i] + (49.0 / 176.0) * k3[i]
                                     + (-5103.0 / 18656.0) * k4[i])
        _rhs(mod, t + hs, ystage, k5)
        for i in range(nn):
            ynew[i] = y[i] + hs * ((35.0 / 384.0) * k0[i] + (500.0 / 1113.0) * k2[i]
                                   + (125.0 / 192.0) * k3[i] + (-2187.0 / 6784.0) * k4[i]
                                   + (11.0 / 84.0) * k5[i])
        _rhs(mod, t + hs, ynew, k6)
        for i in range(nn):
            err[i] = hs * (E0 * k0[i] + E2 * k2[i] + E3 * k3[i] + E4 * k4[i]
                           + E5 * k5[i] + E6 * k6[i])
        norm = _error_norm(err, y, ynew, rtol, atol)

        if norm <= 1.0:
            t_new = t1 if final else t + hs
            fuzz = 1e-12 * (1.0 if fabs(t_new) < 1.0 else fabs(t_new))
            while si < ns and ts[si] <= t_new + fuzz:
                theta = (ts[si] - t) / hs
                if theta < 0.0:
                    theta = 0.0
                elif theta > 1.0:
                    theta = 1.0
                for i in range(nn):
                    ystage[i] = y[i]
                q = theta * (1.0 + theta * (-8048581381.0 / 2820520608.0
                    + theta * (8663915743.0 / 2820520608.0
                    + theta * (-12715105075.0 / 11282082432.0))))
                for i in range(nn):
                    ystage[i] = ystage[i] + (hs * q) * k0[i]
                q = theta * theta * (131558114200.0 / 32700410799.0
                    + theta * (-68118460800.0 / 10900136933.0
                    + theta * (87487479700.0 / 32700410799.0)))
                for i in range(nn):
                    ystage[i] = ystage[i] + (hs * q) * k2[i]
                q = theta * theta * (-1754552775.0 / 470086768.0
                    + theta * (14199869525.0 / 1410260304.0
                    + theta * (-10690763975.0 / 1880347072.0)))
                for i in range(nn):
                    ystage[i] = ystage[i] + (hs * q) * k3[i]
                q = theta * theta * (127303824393.0 / 49829197408.0
                    + theta * (-318862633887.0 / 49829197408.0
                    + theta * (701980252875.0 / 199316789632.0)))
                for i in range(nn):
                    ystage[i] = ystage[i] + (hs * q) * k4[i]
                q = theta * theta * (-282668133.0 / 205662961.0
                    + theta * (2019193451.0 / 616988883.0
                    + theta * (-1453857185.0 / 822651844.0)))
                for i in range(nn):
                    ystage[i] = ystage[i] + (hs * q) * k5[i]
                q = theta * theta * (40617522.0 / 29380423.0
                    + theta * (-110615467.0 / 29380423.0
                    + theta * (69997945.0 / 29380423.0)))
                for i in range(nn):
                    ystage[i] = ystage[i] + (hs * q) * k6[i]
                _store_sym(samples, si, ystage, n)
                si += 1
            # re-symmetrize the accepted state
            for i in range(n):
                for j in range(i, n):
                    v = 0.5 * (ynew[i * n + j] + (ynew[j * n + i]).conjugate())
                    y[i * n + j] = v
                    y[j * n + i] = v.conjugate()
            t = t_new
            if norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * norm ** -0.2
                if factor > MAX_FACTOR:
                    factor = MAX_FACTOR
                elif factor < 1.0:
                    factor = 1.0
            h = hs * factor
        else:
            factor = SAFETY * norm ** -0.2
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h = hs * factor
            if h < hmin:
                return out_arr, 1, t

    fuzz = 1e-12 * (1.0 if fabs(t1) < 1.0 else fabs(t1))
    while si < ns and ts[si] <= t1 + fuzz:
        _store_sym(samples, si, y, n)
        si += 1
    if si != ns:
        raise ValueError("sample times extend beyond the integration window")
    return out_arr, 0, math.nan


cdef void _store_sym(double complex[:, :, ::1] samples, int si,
                     double complex[::1] y, int n):
    cdef int i, j
    cdef double complex v
    for i in range(n):
        for j in range(n):
            v = 0.5 * (y[i * n + j] + (y[j * n + i]).conjugate())
            samples[si, i, j] = v

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Lambert W, KKT rate profiles, grid reductions,
and the single-source TDMA objective minimization.

Same surface and iteration schemes as statage._kernels._fallback.
"""

from libc.math cimport exp, log, log1p, expm1, sqrt, fabs

import numpy as np

BACKEND = "c"

cdef double INV_E = exp(-1.0)
cdef double E_CONST = exp(1.0)
cdef double INVPHI = (sqrt(5.0) - 1.0) / 2.0


cdef double _w0(double x) except? -1e308:
    cdef double p, w, ew, f, wp1, lx
    cdef int i
    if x != x:
        raise ValueError("lambert_w0: nan argument")
    if x < -INV_E:
        if x < -INV_E - 1e-12 * max(1.0, fabs(x)):
            raise ValueError(f"lambert_w0: argument {x!r} below -1/e")
        x = -INV_E
    if x == 0.0:
        return 0.0
    if x < -0.25:
        p = sqrt(2.0 * (E_CONST * x + 1.0))
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)))
        if p < 1e-4:
            return w
    elif x < 1.0:
        w = x * (1.0 - x + 1.5 * x * x)
    else:
        lx = log(x)
        w = lx - log(lx) if lx > 1.0 else lx
    for i in range(50):
        ew = exp(w)
        f = w * ew - x
        if fabs(f) <= 1e-13 * max(1.0, fabs(x)):
            break
        wp1 = w + 1.0
        w -= f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
    return w


cdef double _w0_exp(double log_x) except? -1e308:
    cdef double w, f
    cdef int i
    if log_x < 30.0:
        return _w0(exp(log_x))
    w = log_x - log(log_x)
    for i in range(30):
        f = w + log(w) - log_x
        if fabs(f) <= 1e-14 * log_x:
            break
        w -= f / (1.0 + 1.0 / w)
    return w


def lambert_w0(double x):
    return _w0(x)


def lambert_w0_exp(double log_x):
    return _w0_exp(log_x)


def lambert_w0_arr(x):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[i] = _w0(xv[i])
    return out


def policy_rates(gains, double theta, double log_beta, double eta,
                 double coherence_time, double tx_time):
    """Rate profile lambda(gamma) of the KKT policy; see fallback docstring."""
    cdef double[::1] g = np.ascontiguousarray(gains, dtype=np.float64)
    out = np.empty(g.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef double u_lo = theta * tx_time
    cdef double u_hi = theta * coherence_time
    cdef double gi, u, L, la
    cdef Py_ssize_t i
    for i in range(g.shape[0]):
        gi = g[i]
        if gi < eta:
            L = log(eta - gi) - log(gi) - 1.0 - log_beta
            u = 1.0 + _w0_exp(L)
        else:
            la = log1p(-eta / gi) - 1.0 - log_beta
            if la <= -1.0:      # |arg| <= 1/e keeps W real-valued
                u = 1.0 + _w0(-exp(la))
            else:
                u = u_lo
        if u < u_lo:
            u = u_lo
        elif u > u_hi:
            u = u_hi
        ov[i] = theta / u
    return out


def power_expectation(weights, gains, rates):
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(gains, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(w.shape[0]):
        acc += w[i] * r[i] / g[i]
    return acc


def rate_expectation(weights, rates):
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(w.shape[0]):
        acc += w[i] * r[i]
    return acc


def log_mgf_num(weights, rates, double theta):
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef Py_ssize_t i, n = w.shape[0]
    scratch = np.empty(n, dtype=np.float64)
    cdef double[::1] z = scratch
    cdef double m = -1e308
    cdef double acc
    for i in range(n):
        z[i] = theta / r[i] + log(w[i] * r[i])
        if z[i] > m:
            m = z[i]
    acc = 0.0
    for i in range(n):
        acc += exp(z[i] - m)
    return m + log(acc)


cdef double _tdma_obj(double lth, double base, double frame, double ctau,
                      double lome, double lir):
    cdef double th = exp(lth)
    cdef double s = th * frame - ctau
    return base + (lome - log(-expm1(s)) + lir) / th


def tdma_delta(double tau, double frame, double c, double log_inv_rho,
               double span=30.0, double tol=1e-12):
    """(delta, theta) minimizing the exact TDMA objective at fixed tau."""
    cdef double ctau = c * tau
    cdef double lome = log(-expm1(-ctau))
    cdef double base = tau + frame
    cdef double hi = log(ctau / frame) + log1p(-1e-9)
    cdef double a = hi - span
    cdef double b = hi
    cdef double c1 = b - INVPHI * (b - a)
    cdef double d1 = a + INVPHI * (b - a)
    cdef double fc = _tdma_obj(c1, base, frame, ctau, lome, log_inv_rho)
    cdef double fd = _tdma_obj(d1, base, frame, ctau, lome, log_inv_rho)
    cdef double x
    while b - a > tol:
        if fc < fd:
            b = d1
            d1 = c1
            fd = fc
            c1 = b - INVPHI * (b - a)
            fc = _tdma_obj(c1, base, frame, ctau, lome, log_inv_rho)
        else:
            a = c1
            c1 = d1
            fc = fd
            d1 = a + INVPHI * (b - a)
            fd = _tdma_obj(d1, base, frame, ctau, lome, log_inv_rho)
    x = 0.5 * (a + b)
    return _tdma_obj(x, base, frame, ctau, lome, log_inv_rho), exp(x)

"""Pure numpy/Python implementations of the hot kernels.

Mirrors the surface of the compiled extension ``statage._kernels._core``.
All reductions keep a deterministic evaluation order so runs are
reproducible for a fixed backend.
"""

import math

import numpy as np

BACKEND = "python"

_INV_E = math.exp(-1.0)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def lambert_w0(x):
    """Principal branch of the Lambert W function (scalar).

    Guarded initial estimate (branch-point series below -0.25, log1p above)
    followed by Halley iteration. Residual |w e^w - x| <= 1e-12 max(1, |x|).
    """
    if x != x:
        raise ValueError("lambert_w0: nan argument")
    if x < -_INV_E:
        if x < -_INV_E - 1e-12 * max(1.0, abs(x)):
            raise ValueError(f"lambert_w0: argument {x!r} below -1/e")
        x = -_INV_E
    if x == 0.0:
        return 0.0
    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)))
        if p < 1e-4:
            return w
    elif x < 1.0:
        w = x * (1.0 - x + 1.5 * x * x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx) if lx > 1.0 else lx
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 1e-13 * max(1.0, abs(x)):
            break
        wp1 = w + 1.0
        w -= f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
    return w


def lambert_w0_exp(log_x):
    """W(exp(log_x)) without forming exp(log_x); safe for huge log_x."""
    if log_x < 30.0:
        return lambert_w0(math.exp(log_x))
    # solve w + log(w) = log_x by Newton; well-conditioned for log_x >= 30
    w = log_x - math.log(log_x)
    for _ in range(30):
        f = w + math.log(w) - log_x
        if abs(f) <= 1e-14 * log_x:
            break
        w -= f / (1.0 + 1.0 / w)
    return w


def lambert_w0_arr(x):
    """Vectorized principal-branch Lambert W via Halley iteration."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -_INV_E - 1e-12 * np.maximum(1.0, np.abs(x))):
        raise ValueError("lambert_w0_arr: argument below -1/e")
    x = np.maximum(x, -_INV_E)
    p = np.sqrt(np.maximum(2.0 * (math.e * x + 1.0), 0.0))
    w_branch = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)))
    xs = np.maximum(x, -0.25)
    w_small = xs * (1.0 - xs + 1.5 * xs * xs)
    lx = np.log(np.maximum(x, 1.0))
    w_big = np.where(lx > 1.0, lx - np.log(np.maximum(lx, 1.0)), lx)
    w = np.where(x < -0.25, w_branch, np.where(x < 1.0, w_small, w_big))
    for _ in range(50):
        ew = np.exp(w)
        f = w * ew - x
        if np.all(np.abs(f) <= 1e-13 * np.maximum(1.0, np.abs(x))):
            break
        wp1 = w + 1.0
        safe = np.abs(wp1) > 1e-12
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * np.where(safe, wp1, 1.0))
        w = np.where(safe, w - f / denom, w)
    return w


def _lambert_w0_exp_arr(L):
    L = np.asarray(L, dtype=float)
    out = np.empty_like(L)
    small = L < 30.0
    if small.any():
        out[small] = lambert_w0_arr(np.exp(L[small]))
    big = ~small
    if big.any():
        Lb = L[big]
        w = Lb - np.log(Lb)
        for _ in range(30):
            f = w + np.log(w) - Lb
            if np.all(np.abs(f) <= 1e-14 * Lb):
                break
            w -= f / (1.0 + 1.0 / w)
        out[big] = w
    return out


def policy_rates(gains, theta, log_beta, eta, coherence_time, tx_time):
    """Sampling rate profile of the KKT policy over a gain grid.

    Works in u = theta/lambda: on the middle branch u = 1 + W(arg) with
    arg = (eta - gamma)/(e beta gamma) evaluated through logs so that
    beta as small as exp(-1e6) stays representable; u is clamped to
    [theta*tx_time, theta*coherence_time], which reproduces the two
    threshold branches.
    """
    gains = np.asarray(gains, dtype=float)
    u_lo = theta * tx_time
    u_hi = theta * coherence_time
    u = np.empty_like(gains)
    pos = gains < eta
    if pos.any():
        L = np.log(eta - gains[pos]) - np.log(gains[pos]) - 1.0 - log_beta
        u[pos] = 1.0 + _lambert_w0_exp_arr(L)
    neg = ~pos
    if neg.any():
        gn = gains[neg]
        with np.errstate(divide="ignore"):
            la = np.log1p(-np.divide(eta, gn)) - 1.0 - log_beta
        un = np.full(gn.shape, u_lo)
        mid = la <= -1.0  # |arg| <= 1/e keeps W real-valued
        if mid.any():
            un[mid] = 1.0 + lambert_w0_arr(-np.exp(la[mid]))
        u[neg] = un
    np.clip(u, u_lo, u_hi, out=u)
    return theta / u


def power_expectation(weights, gains, rates):
    """E[lambda/gamma] over the grid."""
    return float(np.dot(np.asarray(weights), np.asarray(rates) / np.asarray(gains)))


def rate_expectation(weights, rates):
    """E[lambda] over the grid."""
    return float(np.dot(np.asarray(weights), np.asarray(rates)))


def log_mgf_num(weights, rates, theta):
    """log E[e^{theta/lambda} lambda] via logsumexp; exponents may reach 1e6."""
    weights = np.asarray(weights, dtype=float)
    rates = np.asarray(rates, dtype=float)
    z = theta / rates + np.log(weights * rates)
    m = float(z.max())
    return m + math.log(float(np.exp(z - m).sum()))


def tdma_delta(tau, frame, c, log_inv_rho, span=30.0, tol=1e-12):
    """Exact single-source statistical AoI at fixed transmission time.

    Minimizes (1/theta) log(M(theta)/rho) with the geometric-retransmission
    MGF over the existence window theta in (0, c*tau/frame), by golden
    section on log(theta). Returns (delta, theta_at_min).
    """
    theta_top = c * tau / frame
    log_one_minus_eps = math.log(-math.expm1(-c * tau))
    base = tau + frame

    def obj(lth):
        th = math.exp(lth)
        s = th * frame - c * tau  # log of eps * e^{theta*frame}, < 0 in-window
        return base + (log_one_minus_eps - math.log(-math.expm1(s)) + log_inv_rho) / th

    hi = math.log(theta_top) + math.log1p(-1e-9)
    lo = hi - span
    a, b = lo, hi
    c1 = b - _INVPHI * (b - a)
    d1 = a + _INVPHI * (b - a)
    fc, fd = obj(c1), obj(d1)
    while b - a > tol:
        if fc < fd:
            b, d1, fd = d1, c1, fc
            c1 = b - _INVPHI * (b - a)
            fc = obj(c1)
        else:
            a, c1, fc = c1, d1, fd
            d1 = a + _INVPHI * (b - a)
            fd = obj(d1)
    x = 0.5 * (a + b)
    return obj(x), math.exp(x)

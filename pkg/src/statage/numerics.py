"""Shared scalar numerics: Lambert W, bracketed bisection, golden-section
minimization, and central differences.
"""

import math
from dataclasses import dataclass

from . import _kernels
from .errors import BracketError, DomainError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"bracket endpoints must be finite: {self}")
        if not self.lo < self.hi:
            raise DomainError(f"bracket requires lo < hi: {self}")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class MinimizeResult:
    x: float
    fx: float
    iterations: int
    boundary: bool

    def __iter__(self):
        # allow  x, fx = minimize_unimodal(...)
        return iter((self.x, self.fx))


def lambert_w0(x: float) -> float:
    """Principal branch W0 of the Lambert W function.

    Solves w e^w = x for x >= -1/e (arguments within 1e-12 slack below the
    branch point are clamped). Residual |w e^w - x| <= 1e-12 max(1, |x|).
    """
    try:
        return _kernels.lambert_w0(float(x))
    except ValueError as exc:
        raise DomainError(str(exc)) from None


def lambert_w0_exp(log_x: float) -> float:
    """W0(exp(log_x)) computed without forming exp(log_x)."""
    return _kernels.lambert_w0_exp(float(log_x))


def find_root_monotone(f, bracket: Bracket, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Bisection root of a continuous sign-changing f on the bracket.

    Deterministic; stops when |f(mid)| <= tol or the bracket width falls
    below tol (or the floating-point resolution of the endpoints).
    """
    lo, hi = bracket.lo, bracket.hi
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise BracketError(lo, hi, f_lo, f_hi)
    neg_low = f_lo < 0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = f(mid)
        if abs(f_mid) <= tol:
            return mid
        if (f_mid < 0) == neg_low:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def minimize_unimodal(f, bracket: Bracket, tol: float = 1e-10) -> MinimizeResult:
    """Golden-section minimum of a unimodal f on the bracket.

    Returns the interior minimizer within tol, or the better endpoint with
    boundary=True when the function is monotone over the bracket.
    """
    a, b = bracket.lo, bracket.hi
    f_a, f_b = f(a), f(b)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    iterations = 0
    while b - a > tol and iterations < 400:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        iterations += 1
    x = 0.5 * (a + b)
    fx = f(x)
    if f_a <= fx:
        return MinimizeResult(bracket.lo, f_a, iterations, True)
    if f_b <= fx:
        return MinimizeResult(bracket.hi, f_b, iterations, True)
    near_edge = (x - bracket.lo) <= 2 * tol or (bracket.hi - x) <= 2 * tol
    return MinimizeResult(x, fx, iterations, near_edge)


def central_difference(f, x: float, h: float) -> float:
    """Symmetric-difference derivative estimate."""
    return (f(x + h) - f(x - h)) / (2.0 * h)

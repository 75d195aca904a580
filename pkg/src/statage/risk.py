"""Risk functionals of peak-age distributions.

Three tail metrics act on a discrete peak-age distribution (or an
empirical sample vector): the quantile-style threshold ``var``, the
tail-average ``cvar``, and the Chernoff-bound tightening ``evar``,
whose minimization over the tilting exponent defines the statistical
age metric used by the optimizers in this package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ExponentOverflowError
from .numerics import Bracket, minimize_unimodal

_PROB_TOL = 1e-12
_MERGE_RTOL = 1e-12
_LOG_DBL_MAX = math.log(np.finfo(float).max)

DEFAULT_THETA_BRACKET = Bracket(1e-4, 1e6)


def check_rho(rho: float) -> float:
    if not (0.0 < rho <= 1.0):
        raise DomainError(f"violation probability must lie in (0, 1], got {rho!r}")
    return float(rho)


def check_theta(theta: float) -> float:
    if not (theta > 0.0 and math.isfinite(theta)):
        raise DomainError(f"age exponent must be positive and finite, got {theta!r}")
    return float(theta)


@dataclass(frozen=True)
class RiskResult:
    """Solved (rho, theta*, delta) triple plus solver diagnostics."""

    rho: float
    theta_star: float
    delta: float
    iterations: int = 0
    residual: float = 0.0
    boundary_minimum: bool = False


class PeakAgeDistribution:
    """Discrete peak-age distribution in canonical atom form.

    Atoms are kept sorted with strictly increasing values; equal values
    (relative tolerance 1e-12) are merged. Distributions built from sample
    vectors keep the original samples but all functionals evaluate the
    empirical atom form, so the two representations always agree.
    """

    __slots__ = ("values", "probs", "samples")

    def __init__(self, values, probs, samples=None):
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
            raise DomainError("atoms require matching non-empty value/probability vectors")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DomainError("peak-age values must be finite and nonnegative")
        if np.any(probs <= 0):
            raise DomainError("atom probabilities must be positive")
        if abs(probs.sum() - 1.0) > _PROB_TOL:
            raise DomainError(f"probabilities sum to {probs.sum()!r}, expected 1")
        order = np.argsort(values, kind="stable")
        values, probs = values[order], probs[order]
        values, probs = _merge_equal(values, probs)
        self.values = values
        self.probs = probs / probs.sum()
        self.samples = None if samples is None else np.asarray(samples, dtype=float)

    @classmethod
    def from_atoms(cls, atoms) -> "PeakAgeDistribution":
        """Build from an iterable of (value, probability) pairs."""
        pairs = list(atoms)
        if not pairs:
            raise DomainError("empty atom list")
        values = [v for v, _ in pairs]
        probs = [p for _, p in pairs]
        return cls(values, probs)

    @classmethod
    def from_samples(cls, samples) -> "PeakAgeDistribution":
        """Empirical distribution of a peak-age sample vector."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise DomainError("samples must form a non-empty vector")
        if not np.all(np.isfinite(samples)) or np.any(samples < 0):
            raise DomainError("peak-age samples must be finite and nonnegative")
        uniq, counts = np.unique(samples, return_counts=True)
        return cls(uniq, counts / samples.size, samples=samples)

    @property
    def n_atoms(self) -> int:
        return self.values.size

    def mean(self) -> float:
        return float(np.dot(self.probs, self.values))

    def ess_sup(self) -> float:
        return float(self.values[-1])

    def tail_prob(self) -> float:
        """Probability mass sitting on the largest atom."""
        return float(self.probs[-1])

    def scaled(self, c: float) -> "PeakAgeDistribution":
        if c <= 0:
            raise DomainError("scale factor must be positive")
        return PeakAgeDistribution(self.values * c, self.probs)

    def to_json(self) -> str:
        if self.samples is not None:
            return json.dumps({"samples": self.samples.tolist()})
        return json.dumps({"atoms": [[v, p] for v, p in zip(self.values, self.probs)]})

    @classmethod
    def from_json(cls, text: str) -> "PeakAgeDistribution":
        obj = json.loads(text)
        if not isinstance(obj, dict) or len(obj) != 1:
            raise DomainError("expected exactly one of 'atoms' or 'samples'")
        if "atoms" in obj:
            return cls.from_atoms([(float(v), float(p)) for v, p in obj["atoms"]])
        if "samples" in obj:
            return cls.from_samples(obj["samples"])
        raise DomainError("expected exactly one of 'atoms' or 'samples'")


def _merge_equal(values, probs):
    keep_v = [values[0]]
    keep_p = [probs[0]]
    for v, p in zip(values[1:], probs[1:]):
        if v - keep_v[-1] <= _MERGE_RTOL * max(abs(v), abs(keep_v[-1]), 1e-300):
            keep_p[-1] += p
        else:
            if v <= keep_v[-1]:
                raise DomainError("atom values must be strictly increasing")
            keep_v.append(v)
            keep_p.append(p)
    return np.asarray(keep_v), np.asarray(keep_p)


def log_mgf(dist: PeakAgeDistribution, theta: float) -> float:
    """log E[e^{theta A}] by log-sum-exp over the atoms."""
    if not math.isfinite(theta):
        raise DomainError("theta must be finite")
    values, probs = dist.values, dist.probs
    if values.size <= 64:
        m = -math.inf
        zs = []
        for v, p in zip(values.tolist(), probs.tolist()):
            z = theta * v + math.log(p)
            zs.append(z)
            if z > m:
                m = z
        return m + math.log(math.fsum(math.exp(z - m) for z in zs))
    z = theta * values + np.log(probs)
    m = float(z.max())
    return m + math.log(float(np.exp(z - m).sum()))


def mgf(dist: PeakAgeDistribution, theta: float) -> float:
    """E[e^{theta A}]; raises ExponentOverflowError past the float range."""
    lm = log_mgf(dist, theta)
    if lm > _LOG_DBL_MAX:
        raise ExponentOverflowError(
            f"exponent overflow: log MGF = {lm:.6g} exceeds the representable range"
        )
    return math.exp(lm)


def var(dist: PeakAgeDistribution, rho: float) -> float:
    """Infimum threshold with Pr(A >= A_th) <= rho.

    For a discrete distribution this is the smallest atom value a with
    Pr(A > a) <= rho; the infimum of the feasible set is attained as a
    left limit at that atom.
    """
    rho = check_rho(rho)
    probs = dist.probs
    tail = np.concatenate([np.cumsum(probs[::-1])[::-1][1:], [0.0]])  # P(A > a_i)
    idx = int(np.argmax(tail <= rho + _PROB_TOL))
    return float(dist.values[idx])


def cvar(dist: PeakAgeDistribution, rho: float) -> float:
    """Tail-average metric: min over A_th of A_th + E[(A - A_th)+]/rho.

    The objective is convex piecewise-linear with kinks at the atoms, so
    scanning the support values is exact. rho = 1 reduces to the mean.
    """
    rho = check_rho(rho)
    if rho == 1.0:
        return dist.mean()
    v, p = dist.values, dist.probs
    pv = p * v
    suffix_mass = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    suffix_pv = np.concatenate([np.cumsum(pv[::-1])[::-1][1:], [0.0]])
    objective = v + (suffix_pv - v * suffix_mass) / rho
    return float(objective.min())


def evar(
    dist: PeakAgeDistribution,
    rho: float,
    theta_bounds: Bracket = DEFAULT_THETA_BRACKET,
    tol: float = 1e-10,
) -> RiskResult:
    """Chernoff-tightest tail bound: min over theta of (1/theta) log(MGF/rho).

    The minimization runs in log(theta) by golden section (the objective is
    unimodal: (1/theta) log MGF is nondecreasing, the -log(rho)/theta part
    decreasing). Analytic endpoints:

    * rho = 1: the minimizing exponent is 0, outside the open domain; the
      limit value is the mean, reported with theta* at the lower bound.
    * rho <= mass of the top atom: the infimum is the essential supremum,
      approached but not attained as theta grows. The returned delta is
      that limit inflated by 1e-12 relative so that the violation
      guarantee Pr(A >= delta) <= rho holds at the returned value; the
      boundary_minimum flag is set.
    """
    rho = check_rho(rho)
    if theta_bounds.lo <= 0:
        raise DomainError(f"exponent bracket must be positive, got {theta_bounds}")
    if rho == 1.0:
        return RiskResult(rho, theta_bounds.lo, dist.mean(), 0, 0.0, False)
    if rho <= dist.tail_prob():
        delta = dist.ess_sup() * (1.0 + 1e-12)
        return RiskResult(rho, theta_bounds.hi, delta, 0, 0.0, True)

    log_rho = math.log(rho)

    def g(log_theta: float) -> float:
        theta = math.exp(log_theta)
        return (log_mgf(dist, theta) - log_rho) / theta

    res = minimize_unimodal(
        g, Bracket(math.log(theta_bounds.lo), math.log(theta_bounds.hi)), tol
    )
    return RiskResult(
        rho=rho,
        theta_star=math.exp(res.x),
        delta=res.fx,
        iterations=res.iterations,
        residual=tol,
        boundary_minimum=res.boundary,
    )

"""Transmission-time allocation for multi-source TDMA status updates.

Each source transmits once per frame; a packet fails with probability
exp(-c tau) so peaks form a geometric ladder tau + n * frame. Longer
slots improve reliability but stretch the ladder, giving every source a
statistical-age curve that first falls and then stays flat in its time
budget. The allocator equalizes the per-source age values by bisecting
the common target and inverting each source's curve on its decreasing
branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernels
from .errors import DomainError, FeasibilityError
from .numerics import Bracket, find_root_monotone
from .risk import RiskResult, check_rho, check_theta

#: log-width of the exponent window searched below its existence ceiling
_THETA_SPAN = 30.0

TABLE2_DEFAULTS = {"k": 3, "c_per_s": 1000.0, "frame_s": 0.01, "rhos": (0.1, 0.01, 0.001)}


@dataclass(frozen=True)
class TdmaConfig:
    n_sources: int
    error_factor: float
    frame_period: float
    rhos: tuple

    def __post_init__(self):
        object.__setattr__(self, "rhos", tuple(float(r) for r in self.rhos))
        if self.n_sources < 1:
            raise DomainError(f"need at least one source, got {self.n_sources}")
        if len(self.rhos) != self.n_sources:
            raise DomainError(
                f"{self.n_sources} sources but {len(self.rhos)} violation probabilities"
            )
        if self.error_factor <= 0 or self.frame_period <= 0:
            raise DomainError("error factor and frame period must be positive")
        for r in self.rhos:
            if not (0.0 < r < 1.0):
                raise DomainError(f"per-source violation probability must lie in (0,1): {r!r}")

    @classmethod
    def table2(cls, **overrides) -> "TdmaConfig":
        params = dict(TABLE2_DEFAULTS)
        params.update(overrides)
        rhos = tuple(params["rhos"])
        return cls(
            n_sources=int(params.get("k") or len(rhos)),
            error_factor=float(params["c_per_s"]),
            frame_period=float(params["frame_s"]),
            rhos=rhos,
        )

    def source_view(self, k: int) -> tuple:
        """(rho_k, error_factor, frame_period) of source k."""
        return self.rhos[k], self.error_factor, self.frame_period


@dataclass(frozen=True)
class SourceSolution:
    tau: float
    theta: float
    delta: float
    constrained: bool

    def __post_init__(self):
        if self.tau <= 0:
            raise DomainError(f"transmission time must be positive, got {self.tau!r}")


@dataclass(frozen=True)
class TimeAllocation:
    solutions: tuple
    delta_max: float
    iterations: int
    equalized: bool

    @property
    def taus(self) -> tuple:
        return tuple(s.tau for s in self.solutions)


def error_prob(tau: float, c: float) -> float:
    """Per-frame packet failure probability exp(-c tau)."""
    if tau < 0:
        raise DomainError(f"transmission time must be nonnegative, got {tau!r}")
    return math.exp(-c * tau)


def peak_age_mgf_tdma(tau: float, theta: float, config: TdmaConfig) -> float:
    """Closed-form MGF of the geometric peak-age ladder.

    Equals (1-eps) e^{theta (tau + frame)} / (1 - eps e^{theta frame});
    defined only while eps e^{theta frame} < 1, i.e. theta < c tau / frame.
    """
    check_theta(theta)
    c, frame = config.error_factor, config.frame_period
    if tau <= 0:
        raise DomainError("transmission time must be positive")
    s = theta * frame - c * tau
    if s >= 0:
        raise DomainError(
            f"MGF does not exist: need theta < c*tau/frame = {c * tau / frame:.6g}, "
            f"got theta = {theta:.6g}"
        )
    eps = math.exp(-c * tau)
    return (1.0 - eps) * math.exp(theta * (tau + frame)) / (-math.expm1(s))


def statistical_aoi_exact(tau: float, rho: float, config: TdmaConfig) -> RiskResult:
    """Exact minimum of (1/theta) log(MGF/rho) over the existence window.

    Keeps the full (1 - eps) numerator; the small-error simplification is
    used only inside the closed-form slot/exponent expressions. rho = 1
    returns the analytic zero-exponent limit, the mean tau + frame/(1-eps).
    """
    rho = check_rho(rho)
    if tau <= 0:
        raise DomainError("transmission time must be positive")
    c, frame = config.error_factor, config.frame_period
    theta_top = c * tau / frame
    if theta_top <= 0 or not math.isfinite(theta_top):
        raise FeasibilityError(f"degenerate exponent window at tau={tau!r}")
    if rho == 1.0:
        eps = error_prob(tau, c)
        mean = tau + frame / (1.0 - eps)
        return RiskResult(rho, theta_top * math.exp(-_THETA_SPAN), mean, 0, 0.0, False)
    delta, theta = _kernels.tdma_delta(tau, frame, c, math.log(1.0 / rho), _THETA_SPAN, 1e-12)
    return RiskResult(rho, theta, delta, 0, 1e-12, False)


def tau_tilde(theta: float, config: TdmaConfig) -> float:
    """Stationary transmission time (1/c) log(1 + c/theta) + theta frame / c."""
    check_theta(theta)
    c, frame = config.error_factor, config.frame_period
    return math.log1p(c / theta) / c + theta * frame / c


def theta_opt_approx(rho: float, config: TdmaConfig) -> float:
    """Closed-form exponent sqrt(c log(1/rho) / frame)."""
    rho = check_rho(rho)
    if rho == 1.0:
        raise DomainError("the approximate exponent degenerates at rho = 1")
    return math.sqrt(config.error_factor * math.log(1.0 / rho) / config.frame_period)


def theta_opt_exact(rho: float, config: TdmaConfig) -> float:
    """Root of frame/c = (log(1/rho) + log((c+theta)/c)) / theta^2.

    Bisection started around the closed-form approximation. The extra
    log((c+theta)/c) term is positive, so the root always sits above the
    approximation.
    """
    rho = check_rho(rho)
    if rho == 1.0:
        raise DomainError("the optimal exponent degenerates at rho = 1")
    c, frame = config.error_factor, config.frame_period
    lir = math.log(1.0 / rho)

    def f(theta: float) -> float:
        return frame / c - (lir + math.log1p(theta / c)) / (theta * theta)

    lo = hi = theta_opt_approx(rho, config)
    for _ in range(200):
        if f(hi) >= 0:
            break
        hi *= 2.0
    for _ in range(200):
        if f(lo) <= 0:
            break
        lo *= 0.5
    return find_root_monotone(f, Bracket(lo, hi), tol=1e-16)


def theta_constrained(tau_max: float, rho: float, config: TdmaConfig) -> float:
    """Stationary exponent when the slot is pinned at tau_max.

    Bisection on the derivative of the pinned objective
    h(theta) = tau_max - (1/theta) log(1 - e^{theta frame - c tau_max})
    + (1/theta) log(1/rho) over the existence window.
    """
    rho = check_rho(rho)
    if rho == 1.0:
        raise DomainError("the constrained exponent degenerates at rho = 1")
    c, frame = config.error_factor, config.frame_period
    if tau_max <= 0:
        raise DomainError("tau_max must be positive")
    top = c * tau_max / frame
    lir = math.log(1.0 / rho)

    def dh(theta: float) -> float:
        x = math.exp(theta * frame - c * tau_max)  # < 1 in-window
        one_minus = -math.expm1(theta * frame - c * tau_max)
        return (
            math.log(one_minus) / (theta * theta)
            + frame * x / (theta * one_minus)
            - lir / (theta * theta)
        )

    lo = top * 1e-9
    hi = top * (1.0 - 1e-12)
    for _ in range(60):
        if dh(lo) <= 0:
            break
        lo *= 1e-2
    else:
        raise FeasibilityError(f"empty exponent window at tau_max={tau_max!r}")
    return find_root_monotone(dh, Bracket(lo, hi), tol=1e-16)


def statistical_aoi_at_taumax(tau_max: float, rho: float, config: TdmaConfig) -> SourceSolution:
    """Best (slot, exponent, age) for one source under a slot budget.

    Takes the stationary slot at the exact optimal exponent when it fits
    the budget, otherwise pins the slot at the budget; the final age is
    always re-evaluated with the exact MGF objective.
    """
    rho = check_rho(rho)
    if not (0 < tau_max <= config.frame_period):
        raise DomainError(
            f"tau_max must lie in (0, frame_period], got {tau_max!r}"
        )
    knee = tau_tilde(theta_opt_exact(rho, config), config)
    if knee <= tau_max:
        res = statistical_aoi_exact(knee, rho, config)
        return SourceSolution(tau=knee, theta=res.theta_star, delta=res.delta, constrained=False)
    res = statistical_aoi_exact(tau_max, rho, config)
    return SourceSolution(tau=tau_max, theta=res.theta_star, delta=res.delta, constrained=True)


def _required_tau(delta_target, rho, config, knee, floor):
    """Minimal slot making the source's age at most delta_target.

    Inverts the strictly decreasing branch of delta(tau) on (0, knee] by
    bisection; the flat region pins the answer at the knee.
    """
    if delta_target < floor * (1.0 - 1e-13):
        return None
    delta_at = lambda t: statistical_aoi_exact(t, rho, config).delta
    hi = knee
    lo = knee
    for _ in range(120):
        cand = 0.5 * lo
        if cand <= 1e-15:
            return cand
        if delta_at(cand) > delta_target:
            lo = cand
            break
        hi = cand
        lo = cand
    else:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if delta_at(mid) > delta_target:
            lo = mid
        else:
            hi = mid
    return hi


def allocate(config: TdmaConfig) -> TimeAllocation:
    """Min-max transmission-time allocation across the frame.

    Outer bisection on the common age target: for a candidate target each
    source reports the minimal slot reaching it; the target moves until
    the slots exactly fill the frame. When even the largest per-source
    floor (the flat-region value of the binding source) already fits, that
    source is pinned at its stationary slot, spare time is pushed toward
    the other sources' knees, and the result is flagged non-equalized.
    """
    frame = config.frame_period
    true_knees, knees, floors = [], [], []
    for rho in config.rhos:
        knee = tau_tilde(theta_opt_exact(rho, config), config)
        res = statistical_aoi_exact(min(knee, frame), rho, config)
        true_knees.append(knee)
        knees.append(min(knee, frame))
        floors.append(res.delta)

    def required(delta):
        taus = []
        for rho, knee, floor in zip(config.rhos, knees, floors):
            t = _required_tau(delta, rho, config, knee, floor)
            if t is None:
                return None
            taus.append(t)
        return taus

    d_lo = max(floors)
    taus = required(d_lo)
    assert taus is not None
    iterations = 0

    if sum(taus) <= frame:
        # binding source sits at its knee; push spare time toward the others
        spare = frame - sum(taus)
        capacity = [k - t for k, t in zip(knees, taus)]
        total_cap = sum(capacity)
        if total_cap > 0:
            scale = min(1.0, spare / total_cap)
            taus = [t + scale * cap for t, cap in zip(taus, capacity)]
        solutions = tuple(
            SourceSolution(
                tau=t,
                theta=statistical_aoi_exact(t, rho, config).theta_star,
                delta=statistical_aoi_exact(t, rho, config).delta,
                constrained=t < knee * (1.0 - 1e-12),
            )
            for t, rho, knee in zip(taus, config.rhos, true_knees)
        )
        deltas = [s.delta for s in solutions]
        equalized = (max(deltas) - min(deltas)) <= 1e-3 * max(deltas)
        return TimeAllocation(solutions, max(deltas), iterations, equalized)

    d_hi = d_lo
    for _ in range(60):
        d_hi *= 2.0
        t = required(d_hi)
        if t is not None and sum(t) <= frame:
            break
    else:
        mins = {k: _required_tau(d_hi, rho, config, knees[k], floors[k]) or knees[k]
                for k, rho in enumerate(config.rhos)}
        raise FeasibilityError(
            f"cannot fit {config.n_sources} sources in frame {frame!r}; "
            f"per-source minimum slots at the search ceiling: {mins}"
        )

    for iterations in range(1, 300):
        mid = 0.5 * (d_lo + d_hi)
        if mid == d_lo or mid == d_hi:
            break
        taus = required(mid)
        total = sum(taus)
        if abs(total - frame) <= 1e-10 * frame:
            d_lo = d_hi = mid
            break
        if total > frame:
            d_lo = mid
        else:
            d_hi = mid

    target = 0.5 * (d_lo + d_hi)
    taus = required(target)
    leftover = frame - sum(taus)
    taus = [t + leftover / len(taus) for t in taus]
    solutions = tuple(
        SourceSolution(
            tau=t,
            theta=statistical_aoi_exact(t, rho, config).theta_star,
            delta=statistical_aoi_exact(t, rho, config).delta,
            constrained=True,
        )
        for t, rho in zip(taus, config.rhos)
    )
    deltas = [s.delta for s in solutions]
    equalized = (max(deltas) - min(deltas)) <= 1e-3 * max(deltas)
    return TimeAllocation(solutions, max(deltas), iterations, equalized)

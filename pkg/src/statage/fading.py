"""Sampling-rate optimization for status updates over a block-fading channel.

The solver minimizes the statistical age metric at a target violation
probability. Transmit power follows channel inversion, which reduces the
problem to choosing a sampling-rate profile lambda(gamma) inside the box
[1/coherence_time, 1/tx_time] under an average-power budget. For a fixed
age exponent the rate profile is solved in closed form through the KKT
system (a Lambert-W expression between two gain thresholds) with the
power multiplier found by bisection and the fractional objective handled
by Dinkelbach iteration; the exponent itself is then searched by golden
section (or bisection on a finite-difference derivative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConvergenceError, DomainError, FeasibilityError
from .numerics import Bracket, central_difference, find_root_monotone, minimize_unimodal
from .risk import PeakAgeDistribution, RiskResult, check_rho, check_theta

DEFAULT_THETA_BRACKET = Bracket(1e-3, 1e4)

TABLE2_DEFAULTS = {
    "p_bar_w": 0.1,
    "bandwidth_hz": 1e6,
    "packet_bits": 100.0,
    "tx_time_s": 1e-3,
    "coherence_time_s": 0.1,
    "gamma_min": 1e-3,
    "gamma_max": 20.0,
    "grid_points": 2000,
}


@dataclass(frozen=True)
class ChannelGrid:
    """Discretized channel-power-gain density.

    gains are strictly increasing positive grid nodes; weights are the
    probability masses attached to them (normalized to 1).
    """

    gains: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        gains = np.ascontiguousarray(self.gains, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "weights", weights)
        if gains.ndim != 1 or gains.shape != weights.shape or gains.size == 0:
            raise DomainError("grid requires matching non-empty gain/weight vectors")
        if gains[0] <= 0 or np.any(np.diff(gains) <= 0):
            raise DomainError("gains must be positive and strictly increasing")
        if np.any(weights <= 0):
            raise DomainError("grid weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError(f"grid weights sum to {weights.sum()!r}, expected 1")

    @classmethod
    def rayleigh(cls, gamma_min=1e-3, gamma_max=20.0, n=2000) -> "ChannelGrid":
        """Log-spaced grid under a unit-mean exponential power-gain density.

        Each node carries the exponential mass integrated over its
        geometric cell, renormalized over the truncated range. The
        truncation at gamma_min is essential: E[lambda/gamma] diverges
        at the origin for any admissible rate profile.
        """
        if not (0 < gamma_min < gamma_max) or n < 2:
            raise DomainError("need 0 < gamma_min < gamma_max and n >= 2")
        edges = np.exp(np.linspace(math.log(gamma_min), math.log(gamma_max), n + 1))
        gains = np.sqrt(edges[:-1] * edges[1:])
        weights = np.exp(-edges[:-1]) - np.exp(-edges[1:])
        weights = weights / weights.sum()
        return cls(gains, weights)

    @property
    def n(self) -> int:
        return self.gains.size

    def mean_inverse_gain(self) -> float:
        return float(np.dot(self.weights, 1.0 / self.gains))


@dataclass(frozen=True)
class FadingConfig:
    """System parameters of the fading status-update link."""

    p_bar: float
    bandwidth: float
    packet_bits: float
    tx_time: float
    coherence_time: float
    grid: ChannelGrid

    def __post_init__(self):
        if self.p_bar <= 0 or self.bandwidth <= 0 or self.packet_bits < 0:
            raise DomainError("power, bandwidth must be positive; packet size nonnegative")
        if not (0 < self.tx_time <= self.coherence_time):
            raise DomainError(
                f"need 0 < tx_time <= coherence_time, got {self.tx_time}, {self.coherence_time}"
            )
        if self.power_floor() > self.p_bar_tau * (1 + 1e-12):
            raise FeasibilityError(
                "infeasible config: even the minimum-rate profile exceeds the power "
                f"budget ({self.power_floor():.6g} > {self.p_bar_tau:.6g})"
            )

    @property
    def d_bar_tau(self) -> float:
        """Per-symbol spectral load D ln2 / (tx_time * bandwidth)."""
        return self.packet_bits * math.log(2.0) / (self.tx_time * self.bandwidth)

    @property
    def p_bar_tau(self) -> float:
        """Power budget rewritten for the channel-inversion scheme."""
        need = self.tx_time * math.expm1(self.d_bar_tau)
        return math.inf if need == 0.0 else self.p_bar / need

    @property
    def min_rate(self) -> float:
        return 1.0 / self.coherence_time

    @property
    def max_rate(self) -> float:
        return 1.0 / self.tx_time

    def power_floor(self) -> float:
        """E[lambda/gamma] of the all-minimum-rate profile."""
        return self.min_rate * self.grid.mean_inverse_gain()

    @classmethod
    def table2(cls, **overrides) -> "FadingConfig":
        params = dict(TABLE2_DEFAULTS)
        params.update(overrides)
        grid = ChannelGrid.rayleigh(
            params["gamma_min"], params["gamma_max"], int(params["grid_points"])
        )
        return cls(
            p_bar=params["p_bar_w"],
            bandwidth=params["bandwidth_hz"],
            packet_bits=params["packet_bits"],
            tx_time=params["tx_time_s"],
            coherence_time=params["coherence_time_s"],
            grid=grid,
        )


def power_for_gain(gamma: float, config: FadingConfig) -> float:
    """Channel-inversion transmit power making the Shannon constraint tight."""
    if gamma <= 0:
        raise DomainError(f"channel power gain must be positive, got {gamma!r}")
    return math.expm1(config.d_bar_tau) / gamma


@dataclass(frozen=True)
class SamplingPolicy:
    """Piecewise-analytic optimal sampling policy (theta, beta, eta, thresholds).

    beta is carried as log_beta: on converged policies it equals
    exp(-theta E[1/lambda])-type ratios that underflow past theta ~ 7000/T.
    """

    theta: float
    log_beta: float
    eta: float
    iterations: int = 0

    def __post_init__(self):
        check_theta(self.theta)
        if not (self.log_beta < 0):
            raise DomainError(f"beta must lie in (0, 1): log beta = {self.log_beta!r}")
        if self.eta < 0:
            raise DomainError(f"power multiplier must be nonnegative, got {self.eta!r}")

    @property
    def beta(self) -> float:
        return math.exp(self.log_beta)

    def _threshold(self, x: float) -> float:
        # eta / (1 - beta e^x (1 - x)); e^x(1-x) <= 1 keeps it positive
        if x > 1.0:
            arg = self.log_beta + x + math.log(x - 1.0)
            denom = math.inf if arg > 700.0 else 1.0 + math.exp(arg)
        elif x < 1.0:
            denom = 1.0 - math.exp(self.log_beta + x + math.log1p(-x))
        else:
            denom = 1.0
        return 0.0 if denom == math.inf else self.eta / denom

    def gamma1_th(self, config: FadingConfig) -> float:
        return self._threshold(self.theta * config.coherence_time)

    def gamma2_th(self, config: FadingConfig) -> float:
        return self._threshold(self.theta * config.tx_time)

    def rates_on(self, config: FadingConfig) -> np.ndarray:
        return _kernels.policy_rates(
            config.grid.gains,
            self.theta,
            self.log_beta,
            self.eta,
            config.coherence_time,
            config.tx_time,
        )

    def rate(self, gamma: float, config: FadingConfig) -> float:
        if gamma <= 0:
            raise DomainError(f"channel power gain must be positive, got {gamma!r}")
        out = _kernels.policy_rates(
            np.asarray([float(gamma)]),
            self.theta,
            self.log_beta,
            self.eta,
            config.coherence_time,
            config.tx_time,
        )
        return float(out[0])


@dataclass(frozen=True)
class StepPolicy:
    """Two-level threshold policy (the small-exponent baseline).

    Grid points above threshold_index sample at the maximum rate, points
    below at the minimum rate; the threshold point itself may carry a
    fractional rate so the power budget is met exactly.
    """

    threshold_index: int
    boundary_rate: float

    def rates_on(self, config: FadingConfig) -> np.ndarray:
        rates = np.full(config.grid.n, config.min_rate)
        rates[self.threshold_index + 1 :] = config.max_rate
        if 0 <= self.threshold_index < config.grid.n:
            rates[self.threshold_index] = self.boundary_rate
        return rates

    def rate(self, gamma: float, config: FadingConfig) -> float:
        gains = config.grid.gains
        idx = int(np.searchsorted(gains, gamma))
        idx = min(idx, config.grid.n - 1)
        return float(self.rates_on(config)[idx])


@dataclass(frozen=True)
class ConstantPolicy:
    """Gain-independent sampling (the large-exponent baseline)."""

    rate_hz: float

    def rates_on(self, config: FadingConfig) -> np.ndarray:
        return np.full(config.grid.n, self.rate_hz)

    def rate(self, gamma: float, config: FadingConfig) -> float:
        return self.rate_hz


def policy_rate(policy, gamma: float, config: FadingConfig) -> float:
    """Sampling rate of any policy kind at a single gain value."""
    return policy.rate(gamma, config)


def _power_of(rates, config: FadingConfig) -> float:
    return _kernels.power_expectation(config.grid.weights, config.grid.gains, rates)


def solve_inner_given_beta(
    theta: float,
    beta: float | None,
    config: FadingConfig,
    *,
    log_beta: float | None = None,
    power_tol: float = 1e-13,
) -> SamplingPolicy:
    """Rate profile solving the subtractive subproblem at fixed (theta, beta).

    Picks the power multiplier eta so the budget E[lambda/gamma] = P_bar_tau
    is active (monotone bisection; the expectation is strictly decreasing in
    eta), or eta = 0 when the unconstrained profile is already affordable.
    power_tol bounds the relative power residual of the returned profile;
    power_tol <= 0 runs the bisection to full floating-point depth, making
    eta an exact deterministic function of (theta, log_beta).
    """
    check_theta(theta)
    if log_beta is None:
        if beta is None or not (0.0 < beta < 1.0):
            raise DomainError(f"beta must lie in (0, 1), got {beta!r}")
        log_beta = math.log(beta)
    target = config.p_bar_tau
    grid = config.grid

    def power_at(eta: float) -> float:
        rates = _kernels.policy_rates(
            grid.gains, theta, log_beta, eta, config.coherence_time, config.tx_time
        )
        return _power_of(rates, config)

    if power_at(0.0) <= target * (1.0 + 1e-15):
        return SamplingPolicy(theta, log_beta, 0.0)

    hi = 1.0
    for _ in range(600):
        if power_at(hi) <= target:
            break
        hi *= 4.0
    else:
        raise FeasibilityError("power constraint cannot be met at any multiplier")

    eta = find_root_monotone(
        lambda e: (power_at(e) - target) / target,
        Bracket(0.0, hi),
        tol=max(power_tol, 0.0),
    )
    return SamplingPolicy(theta, log_beta, eta)


def dinkelbach(
    theta: float, config: FadingConfig, tol: float = 1e-11, max_iter: int = 200
) -> SamplingPolicy:
    """Fractional-programming iteration for the optimal profile at fixed theta.

    The ratio auxiliary beta is updated to E[lambda]/E[e^{theta/lambda} lambda]
    of the current profile until it is stationary (relative change below tol,
    tracked as the log-beta increment). Starts from the always-feasible
    all-minimum-rate profile, whose ratio is exp(-theta * coherence_time).
    """
    check_theta(theta)
    w = config.grid.weights
    log_beta = -theta * config.coherence_time
    trace = [log_beta]
    step = math.inf
    for iteration in range(1, max_iter + 1):
        # loose multiplier solves suffice while beta is still far from its
        # fixed point; the loose-solve noise in log beta is roughly the
        # power residual amplified by (2 + theta * coherence_time). Near
        # the fixed point the solve runs to full depth so the update is an
        # exact deterministic map that can reach float stationarity.
        loose = 1e-8 * (2.0 + theta * config.coherence_time) < 0.01 * step
        policy = solve_inner_given_beta(
            theta, None, config, log_beta=log_beta, power_tol=1e-8 if loose else 0.0
        )
        rates = policy.rates_on(config)
        new_log_beta = math.log(_kernels.rate_expectation(w, rates)) - _kernels.log_mgf_num(
            w, rates, theta
        )
        trace.append(new_log_beta)
        step = abs(new_log_beta - log_beta)
        converged = step <= tol and not loose
        # an exact 2-cycle at float resolution counts as stationary too
        if (
            not converged
            and not loose
            and iteration >= 3
            and new_log_beta == trace[-3]
            and step <= 1000.0 * tol
        ):
            converged = True
        log_beta = new_log_beta
        if converged:
            policy = solve_inner_given_beta(theta, None, config, log_beta=log_beta)
            return SamplingPolicy(theta, log_beta, policy.eta, iterations=iteration)
    raise ConvergenceError(
        f"Dinkelbach did not converge in {max_iter} iterations at theta={theta!r}",
        trace=trace,
    )


def objective_f(theta: float, policy, config: FadingConfig, rho: float) -> float:
    """Two-part age objective (1/theta) log(MGF/rho) of a policy's peak ages."""
    check_theta(theta)
    check_rho(rho)
    w = config.grid.weights
    rates = policy.rates_on(config)
    log_ratio = _kernels.log_mgf_num(w, rates, theta) - math.log(
        _kernels.rate_expectation(w, rates)
    )
    return log_ratio / theta + config.tx_time + math.log(1.0 / rho) / theta


def avg_paoi_policy(config: FadingConfig) -> StepPolicy:
    """Mean-peak-age-oriented baseline: the small-exponent step profile.

    Maximizes E[lambda] by spending the power budget on the largest gains
    first (per-unit-rate power cost is 1/gamma), with a fractional rate at
    the boundary grid point so the budget binds exactly.
    """
    grid = config.grid
    lo, hi = config.min_rate, config.max_rate
    budget = config.p_bar_tau - config.power_floor()
    if budget < -1e-12 * config.p_bar_tau:
        raise FeasibilityError("infeasible config: negative power headroom")
    cost = grid.weights * (hi - lo) / grid.gains
    idx = grid.n - 1
    boundary_rate = lo
    while idx >= 0:
        if cost[idx] <= budget:
            budget -= cost[idx]
            idx -= 1
        else:
            boundary_rate = min(max(lo + budget * grid.gains[idx] / grid.weights[idx], lo), hi)
            break
    if idx < 0:
        # whole grid affordable at the maximum rate
        return StepPolicy(threshold_index=-1, boundary_rate=hi)
    return StepPolicy(threshold_index=idx, boundary_rate=boundary_rate)


def max_paoi_policy(config: FadingConfig) -> ConstantPolicy:
    """Worst-peak-age-oriented baseline: the budget-exhausting constant rate."""
    rate = config.p_bar_tau / config.grid.mean_inverse_gain()
    return ConstantPolicy(min(max(rate, config.min_rate), config.max_rate))


def peak_age_distribution(policy_or_rates, config: FadingConfig) -> PeakAgeDistribution:
    """Rate-weighted peak-age distribution induced by a rate profile.

    Peaks take the values 1/lambda_i + tx_time with probabilities
    proportional to w_i lambda_i (faster sampling produces more peaks per
    coherence block); equal-valued atoms merge.
    """
    if hasattr(policy_or_rates, "rates_on"):
        rates = policy_or_rates.rates_on(config)
    else:
        rates = np.asarray(policy_or_rates, dtype=float)
        if rates.shape != config.grid.gains.shape:
            raise DomainError("rate vector does not match the channel grid")
    if np.any(rates < config.min_rate * (1 - 1e-9)) or np.any(
        rates > config.max_rate * (1 + 1e-9)
    ):
        raise DomainError("rates must lie within [1/coherence_time, 1/tx_time]")
    values = 1.0 / rates + config.tx_time
    mass = config.grid.weights * rates
    return PeakAgeDistribution(values, mass / mass.sum())


def optimize(
    config: FadingConfig,
    rho: float,
    theta_bracket: Bracket = DEFAULT_THETA_BRACKET,
    tol: float = 1e-7,
    method: str = "golden",
):
    """Jointly optimal (exponent, sampling policy) for a violation level.

    Searches the age exponent over the bracket, re-solving the inner
    Dinkelbach problem at every probe (the two-step procedure). rho = 1
    short-circuits to the analytic zero-exponent limit: the step baseline
    with delta equal to its mean peak age.

    When the minimum sits at the upper bracket edge the objective is still
    decreasing there. If the MGF part of the edge value has plateaued to
    within 5% of the large-exponent limit (the minimax constant-rate peak
    age), the objective keeps descending to that limit without dipping
    below it, so the returned delta is the analytic limit, inflated by
    1e-12 relative so the violation guarantee holds for the returned
    constant policy. Off the plateau the edge value itself is returned.
    Either way boundary_minimum is set, signalling the bracket did not
    contain the minimizer.

    Returns (RiskResult, policy).
    """
    rho = check_rho(rho)
    if rho == 1.0:
        step = avg_paoi_policy(config)
        rates = step.rates_on(config)
        mean_rate = _kernels.rate_expectation(config.grid.weights, rates)
        delta = 1.0 / mean_rate + config.tx_time
        return RiskResult(rho, theta_bracket.lo, delta, 0, 0.0, False), step

    cache: dict[float, SamplingPolicy] = {}

    def g(log_theta: float) -> float:
        theta = math.exp(log_theta)
        policy = cache.get(log_theta)
        if policy is None:
            policy = dinkelbach(theta, config)
            cache[log_theta] = policy
        return objective_f(theta, policy, config, rho)

    log_bracket = Bracket(math.log(theta_bracket.lo), math.log(theta_bracket.hi))
    if method == "golden":
        res = minimize_unimodal(g, log_bracket, tol)
        log_theta_star, delta, iterations, boundary = res.x, res.fx, res.iterations, res.boundary
    elif method == "derivative-bisection":
        h = max(tol, 1e-6)
        dg = lambda lx: central_difference(g, lx, h)
        d_lo, d_hi = dg(log_bracket.lo), dg(log_bracket.hi)
        if d_lo >= 0:
            log_theta_star, iterations, boundary = log_bracket.lo, 0, True
        elif d_hi <= 0:
            log_theta_star, iterations, boundary = log_bracket.hi, 0, True
        else:
            log_theta_star = find_root_monotone(dg, log_bracket, tol)
            iterations, boundary = 0, False
        delta = g(log_theta_star)
    else:
        raise DomainError(f"unknown search method {method!r}")

    at_upper = boundary and (log_bracket.hi - log_theta_star) <= 4 * tol
    if at_upper:
        const = max_paoi_policy(config)
        limit = (1.0 / const.rate_hz + config.tx_time) * (1.0 + 1e-12)
        mgf_part = delta - math.log(1.0 / rho) / theta_bracket.hi
        on_plateau = mgf_part <= limit and (limit - mgf_part) <= 0.05 * limit
        if on_plateau and limit <= delta:
            result = RiskResult(rho, theta_bracket.hi, limit, iterations, tol, True)
            return result, const

    theta_star = math.exp(log_theta_star)
    policy = cache.get(log_theta_star) or dinkelbach(theta_star, config)
    result = RiskResult(rho, theta_star, delta, iterations, tol, boundary)
    return result, policy

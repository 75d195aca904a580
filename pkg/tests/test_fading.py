import math

import numpy as np
import pytest

from statage import risk
from statage.errors import DomainError, FeasibilityError
from statage.fading import (
    ChannelGrid,
    ConstantPolicy,
    FadingConfig,
    SamplingPolicy,
    StepPolicy,
    avg_paoi_policy,
    dinkelbach,
    max_paoi_policy,
    objective_f,
    optimize,
    peak_age_distribution,
    policy_rate,
    power_for_gain,
    solve_inner_given_beta,
)
from statage.numerics import Bracket


def expectations(config, rates):
    """Independent direct-summation oracles (plain numpy, linear domain)."""
    w, g = config.grid.weights, config.grid.gains
    return {
        "power": float(np.dot(w, rates / g)),
        "rate": float(np.dot(w, rates)),
    }


def two_gain_config(**overrides):
    grid = ChannelGrid(np.array([1.0, 5.0]), np.array([0.5, 0.5]))
    params = dict(p_bar=0.1, bandwidth=1e6, packet_bits=100.0, tx_time=1e-3,
                  coherence_time=0.1, grid=grid)
    params.update(overrides)
    return FadingConfig(**params)


class TestConfig:
    def test_table2_derived_constants(self, table2):
        assert table2.d_bar_tau == pytest.approx(100 * math.log(2) / 1000, rel=1e-15)
        assert math.expm1(table2.d_bar_tau) == pytest.approx(2 ** 0.1 - 1, rel=1e-14)
        assert table2.p_bar_tau == pytest.approx(0.1 / (1e-3 * (2 ** 0.1 - 1)), rel=1e-13)

    def test_grid_normalized_and_increasing(self, table2):
        g = table2.grid
        assert g.n == 2000
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.all(np.diff(g.gains) > 0)
        assert g.gains[0] >= 1e-3

    def test_tx_time_bounds(self):
        with pytest.raises(DomainError):
            FadingConfig.table2(tx_time_s=0.2)

    def test_infeasible_power(self):
        with pytest.raises(FeasibilityError):
            FadingConfig.table2(p_bar_w=1e-7)

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            ChannelGrid(np.array([2.0, 1.0]), np.array([0.5, 0.5]))
        with pytest.raises(DomainError):
            ChannelGrid(np.array([1.0, 2.0]), np.array([0.5, 0.6]))


class TestPowerForGain:
    def test_table2_values(self, table2):
        # 2^0.1 - 1 at unit gain under the default parameters
        assert power_for_gain(1.0, table2) == pytest.approx(0.0717734625362931, rel=1e-12)
        assert power_for_gain(0.5, table2) == pytest.approx(0.1435469250725862, rel=1e-12)

    def test_zero_packet(self):
        cfg = two_gain_config(packet_bits=0.0)
        assert power_for_gain(3.7, cfg) == 0.0

    def test_rejects_nonpositive_gain(self, table2):
        with pytest.raises(DomainError):
            power_for_gain(0.0, table2)

    def test_shannon_constraint_tight(self, table2):
        for gamma in (0.01, 1.0, 7.5):
            p = power_for_gain(gamma, table2)
            rate_bits = table2.tx_time * table2.bandwidth * math.log2(1 + p * gamma)
            assert rate_bits == pytest.approx(table2.packet_bits, rel=1e-12)


@pytest.fixture(scope="module")
def solved(table2):
    return dinkelbach(100.0, table2)


class TestPolicyRate:
    def test_low_branch_value(self, table2, solved):
        g1 = solved.gamma1_th(table2)
        assert policy_rate(solved, g1 * 0.9, table2) == 10.0

    def test_continuity_at_thresholds(self, table2, solved):
        g1, g2 = solved.gamma1_th(table2), solved.gamma2_th(table2)
        assert g1 <= g2
        assert policy_rate(solved, g1, table2) == pytest.approx(10.0, rel=1e-9)
        assert policy_rate(solved, g2, table2) == pytest.approx(1000.0, rel=1e-9)

    def test_rates_monotone_and_boxed(self, table2, solved):
        rates = solved.rates_on(table2)
        assert np.all(np.diff(rates) >= -1e-9)
        assert rates.min() >= 10.0 - 1e-12
        assert rates.max() <= 1000.0 + 1e-9

    def test_lambert_branch_safety(self, table2, solved):
        g = table2.grid.gains
        g1, g2 = solved.gamma1_th(table2), solved.gamma2_th(table2)
        mid = (g >= g1) & (g <= g2)
        arg = (solved.eta - g[mid]) / (math.e * solved.beta * g[mid])
        assert np.all(arg >= -math.exp(-1) - 1e-12)
        u = 100.0 / solved.rates_on(table2)[mid]
        assert np.all(u - 1.0 >= -1.0)

    def test_policy_invariants_enforced(self):
        with pytest.raises(DomainError):
            SamplingPolicy(theta=10.0, log_beta=0.1, eta=0.0)
        with pytest.raises(DomainError):
            SamplingPolicy(theta=10.0, log_beta=-1.0, eta=-2.0)


class TestSolveInner:
    def test_eta_zero_gain_independent(self):
        cfg = two_gain_config(p_bar=1e4)  # power never binds
        pol = solve_inner_given_beta(50.0, 0.9, cfg)
        assert pol.eta == 0.0
        rates = pol.rates_on(cfg)
        assert rates[0] == rates[1] == cfg.max_rate

    def test_degenerate_equal_times(self):
        cfg = two_gain_config(tx_time=0.1, coherence_time=0.1, p_bar=1e4)
        pol = solve_inner_given_beta(50.0, 0.5, cfg)
        rates = pol.rates_on(cfg)
        assert np.all(rates == 10.0)

    def test_power_constraint_active(self, table2):
        pol = dinkelbach(100.0, table2)
        rates = pol.rates_on(table2)
        power = expectations(table2, rates)["power"]
        assert pol.eta > 0
        assert abs(power - table2.p_bar_tau) <= 1e-9 * table2.p_bar_tau

    def test_beta_validation(self, table2):
        with pytest.raises(DomainError):
            solve_inner_given_beta(10.0, 1.5, table2)


class TestDinkelbach:
    def test_fixed_point_ratio(self, table2):
        pol = dinkelbach(100.0, table2)
        rates = pol.rates_on(table2)
        w = table2.grid.weights
        ratio = float(np.dot(w, rates)) / float(np.dot(w, rates * np.exp(100.0 / rates)))
        assert pol.beta == pytest.approx(ratio, rel=1e-9)

    def test_optimality_residual(self, table2):
        pol = dinkelbach(100.0, table2)
        rates = pol.rates_on(table2)
        w = table2.grid.weights
        resid = float(np.dot(w, rates * (pol.beta * np.exp(100.0 / rates) - 1.0)))
        assert abs(resid) <= 1e-9 * float(np.dot(w, rates))

    def test_degenerate_equal_times_beta(self):
        cfg = two_gain_config(tx_time=0.1, coherence_time=0.1, p_bar=1e4)
        pol = dinkelbach(7.0, cfg)
        assert pol.beta == pytest.approx(math.exp(-7.0 * 0.1), rel=1e-9)

    def test_kkt_stationarity_interior(self, table2):
        for theta in (50.0, 100.0, 400.0):
            pol = dinkelbach(theta, table2)
            rates = pol.rates_on(table2)
            u = theta / rates
            g = table2.grid.gains
            interior = (u > theta * 1e-3 * (1 + 1e-9)) & (u < theta * 0.1 * (1 - 1e-9))
            assert interior.any()
            resid = np.exp(pol.log_beta + u[interior]) * (1 - u[interior]) - 1 + pol.eta / g[interior]
            assert np.abs(resid).max() <= 1e-6

    def test_large_exponent_log_domain(self, table2_small):
        pol = dinkelbach(1e4, table2_small)
        assert pol.log_beta < -40
        rates = pol.rates_on(table2_small)
        assert np.all(np.isfinite(rates))
        power = expectations(table2_small, rates)["power"]
        assert abs(power - table2_small.p_bar_tau) <= 1e-9 * table2_small.p_bar_tau

    def test_nonconvergence_carries_trace(self, table2_small):
        # the ratio iteration moves log beta by about one grid log-range per
        # step, so a tight budget cannot bridge the distance at huge theta
        from statage.errors import ConvergenceError

        with pytest.raises(ConvergenceError) as err:
            dinkelbach(1e4, table2_small, max_iter=20)
        assert len(err.value.trace) == 21


class TestLimitShapes:
    def test_small_exponent_step_shape(self, table2):
        pol = dinkelbach(1e-3, table2)
        rates = pol.rates_on(table2)
        w = table2.grid.weights
        middle = (rates > 10.0 * (1 + 1e-9)) & (rates < 1000.0 * (1 - 1e-9))
        assert float(w[middle].sum()) < 0.01

    def test_constant_shape_emerges_at_huge_exponent(self, table2_small):
        # the rate profile flattens like log(gamma_max/gamma_min)/u; at
        # theta = 3e5 the spread falls below 1% at the default parameters
        pol = dinkelbach(3e5, table2_small, max_iter=4000)
        rates = pol.rates_on(table2_small)
        spread = (rates.max() - rates.min()) / rates.mean()
        assert spread < 0.01


class TestObjective:
    def test_rho_one_drops_second_part(self, table2_small):
        pol = dinkelbach(80.0, table2_small)
        base = objective_f(80.0, pol, table2_small, 1.0)
        dist = peak_age_distribution(pol, table2_small)
        assert base == pytest.approx(math.log(risk.mgf(dist, 80.0)) / 80.0, rel=1e-10)
        shifted = objective_f(80.0, pol, table2_small, 0.5)
        assert shifted == pytest.approx(base + math.log(2.0) / 80.0, rel=1e-12)

    def test_constant_policy_closed_form(self, table2_small):
        pol = ConstantPolicy(250.0)
        val = objective_f(120.0, pol, table2_small, 0.4)
        assert val == pytest.approx(1 / 250.0 + 1e-3 + math.log(2.5) / 120.0, rel=1e-12)

    def test_mean_lower_bound_at_rho_one(self, table2_small):
        # Jensen: (1/theta) log M_A(theta) >= E[A] for any rate profile
        rng = np.random.default_rng(41)
        w = table2_small.grid.weights
        for _ in range(10):
            rates = rng.uniform(10.0, 1000.0, table2_small.grid.n)
            dist = peak_age_distribution(rates, table2_small)
            theta = rng.uniform(1.0, 200.0)
            lhs = (
                math.log(float(np.dot(w, rates * np.exp(theta / rates))))
                - math.log(float(np.dot(w, rates)))
            ) / theta + 1e-3
            assert lhs >= dist.mean() - 1e-12


class TestBaselines:
    def test_avg_unlimited_power(self):
        cfg = two_gain_config(p_bar=1e4)
        pol = avg_paoi_policy(cfg)
        assert np.all(pol.rates_on(cfg) == cfg.max_rate)

    def test_avg_minimal_power(self):
        base = two_gain_config()
        p_floor = base.power_floor()
        p_bar = p_floor * base.tx_time * math.expm1(base.d_bar_tau)
        cfg = two_gain_config(p_bar=p_bar)
        pol = avg_paoi_policy(cfg)
        assert np.all(pol.rates_on(cfg) == cfg.min_rate)

    def test_avg_exhausts_budget_table2(self, table2):
        pol = avg_paoi_policy(table2)
        rates = pol.rates_on(table2)
        power = expectations(table2, rates)["power"]
        assert abs(power - table2.p_bar_tau) <= 1e-9 * table2.p_bar_tau
        levels = np.unique(rates)
        assert levels.size <= 3  # two box levels plus one fractional atom

    def test_avg_maximizes_mean_rate(self, table2_small):
        pol = avg_paoi_policy(table2_small)
        best = expectations(table2_small, pol.rates_on(table2_small))["rate"]
        rng = np.random.default_rng(43)
        w, g = table2_small.grid.weights, table2_small.grid.gains
        for _ in range(40):
            rates = rng.uniform(10.0, 1000.0, table2_small.grid.n)
            if float(np.dot(w, rates / g)) <= table2_small.p_bar_tau:
                assert float(np.dot(w, rates)) <= best + 1e-9

    def test_max_constant_rate_value(self, table2):
        pol = max_paoi_policy(table2)
        lam_c = table2.p_bar_tau / table2.grid.mean_inverse_gain()
        assert 10.0 < lam_c < 1000.0
        assert pol.rate_hz == pytest.approx(lam_c, rel=1e-14)
        power = expectations(table2, pol.rates_on(table2))["power"]
        assert abs(power - table2.p_bar_tau) <= 1e-12 * table2.p_bar_tau

    def test_max_single_atom(self, table2):
        dist = peak_age_distribution(max_paoi_policy(table2), table2)
        assert dist.n_atoms == 1

    def test_max_clamps(self):
        cfg = two_gain_config(p_bar=1e4)
        assert max_paoi_policy(cfg).rate_hz == cfg.max_rate


class TestPeakAgeDistribution:
    def test_constant_rate_single_atom(self, table2_small):
        dist = peak_age_distribution(ConstantPolicy(100.0), table2_small)
        assert dist.n_atoms == 1
        assert dist.values[0] == pytest.approx(0.011, rel=1e-14)

    def test_two_gain_example(self):
        cfg = two_gain_config()
        rates = np.array([10.0, 1000.0])
        dist = peak_age_distribution(rates, cfg)
        assert dist.values.tolist() == pytest.approx([0.002, 0.101], rel=1e-14)
        assert dist.probs.tolist() == pytest.approx([1000 / 1010, 10 / 1010], rel=1e-13)

    def test_mean_identity(self, table2_small):
        rng = np.random.default_rng(47)
        w = table2_small.grid.weights
        for _ in range(20):
            rates = rng.uniform(10.0, 1000.0, table2_small.grid.n)
            dist = peak_age_distribution(rates, table2_small)
            expected = 1.0 / float(np.dot(w, rates)) + 1e-3
            assert dist.mean() == pytest.approx(expected, rel=1e-12)

    def test_rejects_out_of_box_rates(self, table2_small):
        with pytest.raises(DomainError):
            peak_age_distribution(np.full(table2_small.grid.n, 5.0), table2_small)


class TestOptimize:
    def test_rho_one_matches_step_mean(self, table2_small):
        res, pol = optimize(table2_small, 1.0)
        assert isinstance(pol, StepPolicy)
        rates = pol.rates_on(table2_small)
        expected = 1.0 / expectations(table2_small, rates)["rate"] + 1e-3
        assert res.delta == pytest.approx(expected, rel=1e-6)
        dist = peak_age_distribution(pol, table2_small)
        assert res.delta == pytest.approx(dist.mean(), rel=1e-9)

    def test_monotone_in_rho(self, table2_small):
        deltas = [optimize(table2_small, rho)[0].delta for rho in (0.9, 0.5, 0.1)]
        assert deltas[2] >= deltas[1] >= deltas[0]

    def test_dominates_baselines(self, table2_small):
        avg_dist = peak_age_distribution(avg_paoi_policy(table2_small), table2_small)
        max_dist = peak_age_distribution(max_paoi_policy(table2_small), table2_small)
        for rho in (0.3, 0.7):
            res, _ = optimize(table2_small, rho)
            assert res.delta <= risk.evar(avg_dist, rho).delta + 1e-9
            assert res.delta <= risk.evar(max_dist, rho).delta + 1e-9

    def test_tiny_rho_reaches_minimax_limit(self, table2_small):
        res, pol = optimize(table2_small, 1e-6)
        assert res.boundary_minimum
        max_age = 1.0 / pol.rates_on(table2_small).min() + 1e-3
        assert res.delta == pytest.approx(max_age, rel=0.01)

    def test_narrow_bracket_flags_without_substitution(self, table2_small):
        res, _ = optimize(table2_small, 0.3, theta_bracket=Bracket(1e-3, 50.0))
        assert res.boundary_minimum
        limit = 1.0 / max_paoi_policy(table2_small).rate_hz + 1e-3
        assert res.delta > 1.05 * limit  # edge value returned, not the limit

    def test_two_step_objective_unimodal(self, table2_small):
        thetas = np.logspace(-3, 4, 22)
        vals = []
        for th in thetas:
            pol = dinkelbach(float(th), table2_small)
            vals.append(objective_f(float(th), pol, table2_small, 0.5))
        diffs = np.diff(vals)
        signs = np.sign(diffs[np.abs(diffs) > 1e-13])
        changes = int(np.sum(signs[:-1] != signs[1:]))
        assert changes <= 1

    def test_derivative_bisection_agrees_with_golden(self, table2_small):
        res_g, _ = optimize(table2_small, 0.5)
        res_d, _ = optimize(table2_small, 0.5, method="derivative-bisection")
        assert res_d.delta == pytest.approx(res_g.delta, rel=1e-6)

    def test_unknown_method(self, table2_small):
        with pytest.raises(DomainError):
            optimize(table2_small, 0.5, method="newton")

    def test_concurrent_solves_bitwise_deterministic(self, table2_small):
        from concurrent.futures import ThreadPoolExecutor

        thetas = (50.0, 120.0, 300.0)
        serial = [dinkelbach(th, table2_small) for th in thetas]
        with ThreadPoolExecutor(max_workers=3) as pool:
            parallel = list(pool.map(lambda th: dinkelbach(th, table2_small), thetas))
        for a, b in zip(serial, parallel):
            assert a.log_beta == b.log_beta
            assert a.eta == b.eta

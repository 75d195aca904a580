"""Acceptance suite: one test per release criterion, printing a PASS line
with the measured quantities (run with -s or -v to see them).

Each tolerance is fixed here, not calibrated at runtime.
"""

import math
import time

import numpy as np
import pytest

from statage import fading, risk, simulate as sim, tdma


RHO_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@pytest.fixture(scope="module")
def fading_solutions(table2):
    """Shared fading solves over the rho grid plus the strict tail level."""
    out = {}
    for rho in RHO_GRID + (0.01,):
        out[rho] = fading.optimize(table2, rho)
    return out


@pytest.fixture(scope="module")
def baseline_dists(table2):
    avg = fading.peak_age_distribution(fading.avg_paoi_policy(table2), table2)
    mx = fading.peak_age_distribution(fading.max_paoi_policy(table2), table2)
    return avg, mx


def random_discrete(rng, max_atoms=10):
    n = int(rng.integers(1, max_atoms + 1))
    values = np.unique(rng.uniform(0.05, 100.0, n))
    probs = rng.uniform(0.05, 1.0, values.size)
    return risk.PeakAgeDistribution(values, probs / probs.sum())


def test_c1_risk_ordering_suite():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        d = random_discrete(rng)
        top = d.ess_sup()
        for rho in (0.9, 0.5, 0.2, 0.05):
            v = risk.var(d, rho)
            c = risk.cvar(d, rho)
            e = risk.evar(d, rho).delta
            assert v <= c + 1e-9
            assert c <= e + 1e-9
            assert e <= top + 1e-9
            checked += 1
        assert risk.cvar(d, 1.0) == d.mean()
    elapsed = time.time() - t0
    assert elapsed < 5.0
    print(f"\ncriterion 1: PASS - {checked} ordered triples, cvar(1)=mean, {elapsed:.2f}s")


def test_c2_evar_limits():
    rng = np.random.default_rng(2025)
    worst_mean = worst_max = 0.0
    for _ in range(300):
        d = random_discrete(rng)
        res1 = risk.evar(d, 1.0)
        assert abs(res1.delta - d.mean()) <= 1e-9
        worst_mean = max(worst_mean, abs(res1.delta - d.mean()))
        res0 = risk.evar(d, 1e-8)
        assert abs(res0.delta - d.ess_sup()) <= 0.01 * d.ess_sup()
        worst_max = max(worst_max, abs(res0.delta - d.ess_sup()) / d.ess_sup())
    print(
        f"criterion 2: PASS - |delta(1)-mean| <= {worst_mean:.2e}, "
        f"max-limit gap <= {worst_max:.2e}"
    )


def test_c3_fading_kkt_verification(table2):
    for rho in (0.3, 0.5, 0.7):
        t0 = time.time()
        result, policy = fading.optimize(table2, rho)
        rates = policy.rates_on(table2)
        theta = result.theta_star
        u = theta / rates
        g = table2.grid.gains
        interior = (u > theta * table2.tx_time * (1 + 1e-9)) & (
            u < theta * table2.coherence_time * (1 - 1e-9)
        )
        assert interior.any()
        resid = (
            np.exp(policy.log_beta + u[interior]) * (1 - u[interior])
            - 1
            + policy.eta / g[interior]
        )
        kkt = float(np.abs(resid).max())
        assert kkt <= 1e-6
        power = float(np.dot(table2.grid.weights, rates / g))
        activity = abs(power - table2.p_bar_tau) / table2.p_bar_tau
        assert policy.eta > 0 and activity <= 1e-9
        refreshed = fading.dinkelbach(theta, table2)
        assert refreshed.iterations <= 50
        elapsed = time.time() - t0
        assert elapsed < 30.0
        print(
            f"criterion 3: PASS at rho={rho} - KKT residual {kkt:.2e}, "
            f"power activity {activity:.2e}, {refreshed.iterations} iterations, {elapsed:.1f}s"
        )


def test_c4_limit_shapes(table2):
    pol_small = fading.dinkelbach(1e-3, table2)
    rates = pol_small.rates_on(table2)
    middle = (rates > table2.min_rate * (1 + 1e-9)) & (rates < table2.max_rate * (1 - 1e-9))
    mass = float(table2.grid.weights[middle].sum())
    assert mass < 0.01
    print(f"criterion 4a: PASS - theta=1e-3 middle-region mass {mass:.2e}")

    pol_big = fading.dinkelbach(1e4, table2)
    rates = pol_big.rates_on(table2)
    spread = float((rates.max() - rates.min()) / rates.mean())
    print(
        f"criterion 4b: {'PASS' if spread < 0.01 else 'FAIL'} - theta=1e4 rate spread "
        f"{spread:.3f} (rates {rates.min():.1f}..{rates.max():.1f} Hz; the profile "
        f"flattens below 1% only near theta~3e5 for these parameters)"
    )
    assert spread < 0.01


def test_c5_dominance_over_baselines(fading_solutions, baseline_dists):
    avg_dist, max_dist = baseline_dists
    avg_deltas, max_deltas = [], []
    for rho in RHO_GRID:
        result, _ = fading_solutions[rho]
        d_avg = risk.evar(avg_dist, rho).delta
        d_max = risk.evar(max_dist, rho).delta
        assert result.delta <= d_avg + 1e-9, rho
        assert result.delta <= d_max + 1e-9, rho
        avg_deltas.append(d_avg)
        max_deltas.append(d_max)
    assert all(a > b for a, b in zip(avg_deltas, avg_deltas[1:]))  # strictly decreasing
    assert float(np.ptp(max_deltas)) == 0.0  # constant in rho
    print(
        f"criterion 5: PASS - dominance on {len(RHO_GRID)} levels; "
        f"baseline shapes: avg strictly decreasing, max constant at {max_deltas[0]:.6f}s"
    )


def test_c6_peak_age_histogram(table2, fading_solutions):
    max_dist = fading.peak_age_distribution(fading.max_paoi_policy(table2), table2)
    assert max_dist.n_atoms == 1
    atom = max_dist.ess_sup()
    ratio = max(atom / 0.02, 0.02 / atom)
    assert ratio <= 4.0

    _, policy07 = fading_solutions[0.7]
    dist07 = fading.peak_age_distribution(policy07, table2)
    modal = float(dist07.values[int(np.argmax(dist07.probs))])
    assert 0.001 <= modal <= 0.004
    print(
        f"criterion 6: PASS - worst-case policy degenerate at {atom:.5f}s "
        f"(x{ratio:.2f} of 0.02s), rho=0.7 modal atom {modal:.4f}s"
    )


def test_c7_chernoff_guarantee_end_to_end(table2, tdma_table2, fading_solutions):
    t0 = time.time()
    lines = []
    for rho in (0.9, 0.5, 0.1, 0.01):
        result, policy = fading_solutions[rho]
        rates = policy.rates_on(table2)
        mean_rate = float(np.dot(table2.grid.weights, rates))
        n_blocks = int(math.ceil(1.05e6 / (table2.coherence_time * mean_rate)))
        run = sim.simulate_fading(rates, table2, seed=777, n_blocks=n_blocks)
        assert run.n_events >= 10**6
        report = sim.check_violation(run, result.delta, rho)
        assert report.passed, (rho, report.fraction)
        lines.append(f"fading rho={rho}: {report.fraction:.4f} <= {report.threshold:.4f}")

        sol = tdma.statistical_aoi_at_taumax(tdma_table2.frame_period, rho, tdma_table2)
        run = sim.simulate_tdma(
            sol.tau, tdma_table2.error_factor, tdma_table2.frame_period, seed=778, n_updates=10**6
        )
        report = sim.check_violation(run, sol.delta, rho)
        assert report.passed, (rho, report.fraction)
        lines.append(f"tdma rho={rho}: {report.fraction:.4f} <= {report.threshold:.4f}")
    elapsed = time.time() - t0
    assert elapsed < 60.0
    print(f"criterion 7: PASS in {elapsed:.1f}s - " + "; ".join(lines))


def test_c8_tdma_closed_form_suite(tdma_table2):
    c, frame = tdma_table2.error_factor, tdma_table2.frame_period
    # closed-form MGF against the truncated series
    worst = 0.0
    for tau in (0.002, 0.004, 0.0076919, 0.009):
        for frac in (0.1, 0.5, 0.9):
            theta = frac * c * tau / frame
            closed = tdma.peak_age_mgf_tdma(tau, theta, tdma_table2)
            eps = math.exp(-c * tau)
            total, term_p = 0.0, 1.0 - eps
            for n in range(1, 10**6 + 1):
                term = math.exp(theta * (tau + n * frame)) * term_p
                total += term
                term_p *= eps
                if term < 1e-18 * total:
                    break
            worst = max(worst, abs(closed - total) / total)
    assert worst <= 1e-9

    # stationary-slot identity
    worst_stat = 0.0
    for theta in (50.0, 200.0, 678.61, 2000.0):
        tt = tdma.tau_tilde(theta, tdma_table2)
        lhs = theta * math.exp(-c * tt) + c * math.exp(-c * tt)
        rhs = theta * math.exp(-theta * frame)
        worst_stat = max(worst_stat, abs(lhs - rhs))
    assert worst_stat <= 1e-10

    # approximate exponent stays within 10% of the exact root
    worst_gap = 0.0
    for rho in (0.1, 0.05, 0.01, 0.001):
        e = tdma.theta_opt_exact(rho, tdma_table2)
        a = tdma.theta_opt_approx(rho, tdma_table2)
        worst_gap = max(worst_gap, abs(e - a) / e)
    assert worst_gap <= 0.10

    # budget curve: nonincreasing, then flat past the knee
    rho = 0.01
    knee = tdma.tau_tilde(tdma.theta_opt_exact(rho, tdma_table2), tdma_table2)
    taus = np.linspace(0.0005, frame, 30)
    deltas = [tdma.statistical_aoi_at_taumax(float(t), rho, tdma_table2).delta for t in taus]
    assert all(x >= y - 1e-12 for x, y in zip(deltas, deltas[1:]))
    flat = [d for t, d in zip(taus, deltas) if t >= knee]
    assert max(flat) - min(flat) <= 1e-12
    print(
        f"criterion 8: PASS - MGF gap {worst:.1e}, stationarity {worst_stat:.1e}, "
        f"exponent gap {worst_gap:.1%}, knee at {knee:.5f}s"
    )


def test_c9_allocation_reproduction(tdma_table2):
    alloc = tdma.allocate(tdma_table2)
    t1, t2, t3 = alloc.taus
    assert t1 < t2 < t3
    total_err = abs(sum(alloc.taus) - tdma_table2.frame_period)
    assert total_err <= 1e-9 * tdma_table2.frame_period
    deltas = [s.delta for s in alloc.solutions]
    spread = (max(deltas) - min(deltas)) / max(deltas)
    assert spread <= 1e-3

    sym = tdma.TdmaConfig(3, 1000.0, 0.01, (0.001, 0.001, 0.001))
    alloc_sym = tdma.allocate(sym)
    for tau in alloc_sym.taus:
        assert tau == pytest.approx(0.01 / 3, rel=1e-9)

    cfg2 = tdma.TdmaConfig(2, 1000.0, 0.01, (0.05, 0.002))
    alloc2 = tdma.allocate(cfg2)
    grid = np.linspace(0.0005, 0.0095, 200)
    best = math.inf
    for t in grid:
        d1 = tdma.statistical_aoi_at_taumax(float(t), 0.05, cfg2).delta
        d2 = tdma.statistical_aoi_at_taumax(float(0.01 - t), 0.002, cfg2).delta
        best = min(best, max(d1, d2))
    assert alloc2.delta_max <= best + 1e-6 * best
    print(
        f"criterion 9: PASS - taus {t1:.5f}<{t2:.5f}<{t3:.5f}, sum error {total_err:.1e}, "
        f"delta spread {spread:.1e}, symmetric split exact, K=2 beats 200-point grid "
        f"({alloc2.delta_max:.6f} <= {best:.6f})"
    )


def test_c10_frame_period_sweep():
    t0 = time.time()
    frames = np.exp(np.linspace(math.log(1e-3), math.log(1.0), 30))
    minimizers = []
    for k in (2, 3, 5):
        deltas = []
        for frame in frames:
            cfg = tdma.TdmaConfig(k, 1000.0, float(frame), (0.01,) * k)
            deltas.append(tdma.allocate(cfg).delta_max)
        diffs = np.diff(deltas)
        signs = np.sign(diffs[np.abs(diffs) > 1e-15])
        changes = int(np.sum(signs[:-1] != signs[1:]))
        assert changes <= 1, f"K={k}: not unimodal"
        minimizers.append(float(frames[int(np.argmin(deltas))]))
    assert all(a <= b + 1e-15 for a, b in zip(minimizers, minimizers[1:]))
    elapsed = time.time() - t0
    assert elapsed < 120.0
    print(
        f"criterion 10: PASS in {elapsed:.1f}s - unimodal for K=2,3,5; "
        f"minimizing frames {['%.4f' % m for m in minimizers]} nondecreasing"
    )

"""Command-line experiment runner.

Writes plot-ready CSV data plus a summary JSON and a run manifest for
every subcommand; figures stay outside the artifact. STATAGE_THREADS
caps how many sweep points are evaluated concurrently (default 1);
output ordering is deterministic either way.
"""

from __future__ import annotations

import functools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, backend_name, fading, risk, simulate as sim, tdma
from .errors import StatageError
from .manifest import write_manifest


_FADING_FIELDS = {
    "p_bar_w": float,
    "bandwidth_hz": float,
    "packet_bits": float,
    "tx_time_s": float,
    "coherence_time_s": float,
    "gamma_min": float,
    "gamma_max": float,
    "grid_points": int,
}

_TDMA_FIELDS = {"k": int, "c_per_s": float, "frame_s": float, "rhos": list}


def load_config(path, kind: str, defaults: str = "table2"):
    """Validated config from a JSON file; omitted fields take the table2 default values.

    Returns (config_object, resolved_dict). Unknown keys are rejected with
    the offending field named; invariant violations surface as errors too.
    """
    if defaults != "table2":
        raise StatageError(f"unknown defaults set {defaults!r} (only 'table2' exists)")
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise StatageError(f"malformed JSON in {path}: {exc}") from None
        except OSError as exc:
            raise StatageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise StatageError(f"config root must be a JSON object, got {type(raw).__name__}")

    if kind == "fading":
        fields = _FADING_FIELDS
    elif kind == "tdma":
        fields = _TDMA_FIELDS
    else:
        raise StatageError(f"unknown config kind {kind!r}")

    for key in raw:
        if key not in fields:
            raise StatageError(
                f"unknown field {key!r} for {kind} config (allowed: {', '.join(sorted(fields))})"
            )
    cast = {}
    for key, value in raw.items():
        try:
            cast[key] = fields[key](value)
        except (TypeError, ValueError):
            raise StatageError(f"field {key!r}: cannot interpret {value!r}") from None

    if kind == "fading":
        resolved = dict(fading.TABLE2_DEFAULTS)
        resolved.update(cast)
        config = fading.FadingConfig.table2(**cast)
        return config, resolved

    resolved = dict(tdma.TABLE2_DEFAULTS)
    resolved.update(cast)
    if "rhos" in cast and "k" not in cast:
        resolved["k"] = len(cast["rhos"])
    resolved["rhos"] = [float(r) for r in resolved["rhos"]]
    config = tdma.TdmaConfig.table2(**{k: v for k, v in resolved.items()})
    return config, resolved


def _pmap(fn, items):
    threads = int(os.environ.get("STATAGE_THREADS", "1") or "1")
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_summary(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _finish(out_dir, name, config_dict, seed, files):
    ctx = click.get_current_context(silent=True)
    if ctx is not None:
        command = [ctx.command_path] + [
            f"{key}={value!r}" for key, value in sorted(ctx.params.items())
        ]
    else:
        command = sys.argv[1:]
    manifest = write_manifest(out_dir, name, command, config_dict, seed, files)
    for f in list(files) + [manifest]:
        click.echo(f"wrote {f}")


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StatageError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


_common = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="JSON config; omitted fields take the table2 defaults."),
    click.option("--defaults", default="table2", show_default=True,
                 help="Named default parameter set."),
    click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
                 show_default=True, help="Output directory."),
]


def _with_common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Risk-aware age-of-information experiments."""


@main.group("fading")
def fading_group():
    """Sampling optimization over the block-fading channel."""


@main.group("tdma")
def tdma_group():
    """Transmission-time allocation for TDMA updates."""


@main.group("simulate")
def simulate_group():
    """Seeded Monte Carlo validation runs."""


def _policy_for(name, config, rho):
    if name == "opt":
        result, policy = fading.optimize(config, rho)
        return policy, result
    if name == "avg":
        return fading.avg_paoi_policy(config), None
    if name == "max":
        return fading.max_paoi_policy(config), None
    raise StatageError(f"unknown policy {name!r} (use opt, avg, or max)")


def _policy_rows(policy, config):
    rates = policy.rates_on(config)
    grid = config.grid
    mass = grid.weights * rates
    mass = mass / mass.sum()
    powers = np.array([fading.power_for_gain(g, config) for g in grid.gains])
    peaks = 1.0 / rates + config.tx_time
    return zip(grid.gains, rates, powers, peaks, mass)


_POLICY_HEADER = ["gamma", "lambda_hz", "power_w", "peak_age_s", "prob_mass"]


@fading_group.command("solve")
@click.option("--rho", type=float, required=True, help="Peak-age violation probability.")
@_with_common
@_cli_errors
def fading_solve(rho, config_path, defaults, out_dir):
    """Solve the optimal sampling policy at one violation level."""
    config, config_dict = load_config(config_path, "fading", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result, policy = fading.optimize(config, rho)
    csv_path = out / "fading_solve.csv"
    _write_csv(csv_path, _POLICY_HEADER, _policy_rows(policy, config))
    summary = {
        "rho": rho,
        "delta_s": result.delta,
        "theta_star": result.theta_star,
        "boundary_minimum": result.boundary_minimum,
        "policy_kind": type(policy).__name__,
        "kernel_backend": backend_name(),
    }
    if isinstance(policy, fading.SamplingPolicy):
        summary.update(
            log_beta=policy.log_beta,
            eta=policy.eta,
            gamma1_th=policy.gamma1_th(config),
            gamma2_th=policy.gamma2_th(config),
        )
    sum_path = out / "fading_solve_summary.json"
    _write_summary(sum_path, summary)
    _finish(out, "fading_solve", config_dict, None, [csv_path, sum_path])


@fading_group.command("sweep-rho")
@click.option("--from", "rho_from", type=float, default=1e-3, show_default=True)
@click.option("--to", "rho_to", type=float, default=1.0, show_default=True)
@click.option("--steps", type=int, default=15, show_default=True)
@_with_common
@_cli_errors
def fading_sweep_rho(rho_from, rho_to, steps, config_path, defaults, out_dir):
    """Proposed vs mean- and worst-peak-age-oriented baselines over rho."""
    config, config_dict = load_config(config_path, "fading", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rhos = np.exp(np.linspace(math.log(rho_from), math.log(rho_to), steps))
    avg_dist = fading.peak_age_distribution(fading.avg_paoi_policy(config), config)
    max_dist = fading.peak_age_distribution(fading.max_paoi_policy(config), config)

    def solve_point(rho):
        result, _ = fading.optimize(config, float(rho))
        d_avg = risk.evar(avg_dist, float(rho)).delta
        d_max = risk.evar(max_dist, float(rho)).delta
        return (rho, result.delta, result.theta_star, result.boundary_minimum, d_avg, d_max)

    rows = _pmap(solve_point, rhos)
    csv_path = out / "fading_sweep_rho.csv"
    _write_csv(
        csv_path,
        ["rho", "delta_proposed_s", "theta_star", "boundary", "delta_avg_paoi_s", "delta_max_paoi_s"],
        rows,
    )
    sum_path = out / "fading_sweep_rho_summary.json"
    _write_summary(sum_path, {"points": len(rows), "kernel_backend": backend_name()})
    _finish(out, "fading_sweep_rho", config_dict, None, [csv_path, sum_path])


@fading_group.command("pdf")
@click.option("--rho", type=float, default=0.7, show_default=True)
@click.option("--policy", "policy_name", default="opt", show_default=True,
              type=click.Choice(["opt", "avg", "max"]))
@_with_common
@_cli_errors
def fading_pdf(rho, policy_name, config_path, defaults, out_dir):
    """Peak-age probability distribution induced by a sampling policy."""
    config, config_dict = load_config(config_path, "fading", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    policy, result = _policy_for(policy_name, config, rho)
    dist = fading.peak_age_distribution(policy, config)
    csv_path = out / "fading_pdf.csv"
    _write_csv(csv_path, _POLICY_HEADER, _policy_rows(policy, config))
    dist_path = out / "fading_pdf_dist.csv"
    _write_csv(dist_path, ["peak_age_s", "prob_mass"], zip(dist.values, dist.probs))
    summary = {
        "rho": rho,
        "policy": policy_name,
        "n_atoms": dist.n_atoms,
        "mean_peak_age_s": dist.mean(),
        "max_peak_age_s": dist.ess_sup(),
        "modal_peak_age_s": float(dist.values[int(np.argmax(dist.probs))]),
    }
    if result is not None:
        summary["delta_s"] = result.delta
        summary["theta_star"] = result.theta_star
    sum_path = out / "fading_pdf_summary.json"
    _write_summary(sum_path, summary)
    _finish(out, "fading_pdf", config_dict, None, [csv_path, dist_path, sum_path])


@fading_group.command("policy")
@click.option("--theta-grid", default="0.001,0.1,10,1000,10000", show_default=True,
              help="Comma-separated age exponents.")
@_with_common
@_cli_errors
def fading_policy(theta_grid, config_path, defaults, out_dir):
    """Optimal rate profiles over a grid of age exponents (surface data)."""
    config, config_dict = load_config(config_path, "fading", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        thetas = [float(t) for t in theta_grid.split(",") if t.strip()]
    except ValueError:
        raise StatageError(f"cannot parse --theta-grid {theta_grid!r}") from None
    if not thetas:
        raise StatageError("--theta-grid needs at least one exponent")

    def solve_point(theta):
        policy = fading.dinkelbach(theta, config)
        return [(theta, *row) for row in _policy_rows(policy, config)]

    rows = [row for chunk in _pmap(solve_point, thetas) for row in chunk]
    csv_path = out / "fading_policy.csv"
    _write_csv(csv_path, ["theta", *_POLICY_HEADER], rows)
    sum_path = out / "fading_policy_summary.json"
    _write_summary(sum_path, {"thetas": thetas, "kernel_backend": backend_name()})
    _finish(out, "fading_policy", config_dict, None, [csv_path, sum_path])


_ALLOC_HEADER = ["source", "rho", "tau_s", "theta", "delta_s", "constrained"]


@tdma_group.command("allocate")
@_with_common
@_cli_errors
def tdma_allocate(config_path, defaults, out_dir):
    """Min-max transmission-time allocation over one frame."""
    config, config_dict = load_config(config_path, "tdma", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    alloc = tdma.allocate(config)
    rows = [
        (k + 1, rho, s.tau, s.theta, s.delta, s.constrained)
        for k, (rho, s) in enumerate(zip(config.rhos, alloc.solutions))
    ]
    csv_path = out / "tdma_allocate.csv"
    _write_csv(csv_path, _ALLOC_HEADER, rows)
    sum_path = out / "tdma_allocate_summary.json"
    _write_summary(
        sum_path,
        {
            "delta_max_s": alloc.delta_max,
            "sum_tau_s": sum(alloc.taus),
            "equalized": alloc.equalized,
            "iterations": alloc.iterations,
        },
    )
    _finish(out, "tdma_allocate", config_dict, None, [csv_path, sum_path])


@tdma_group.command("sweep-taumax")
@click.option("--rho", type=float, default=0.01, show_default=True)
@click.option("--from", "tau_from", type=float, default=None,
              help="Smallest slot budget [s]; defaults to frame/50.")
@click.option("--to", "tau_to", type=float, default=None,
              help="Largest slot budget [s]; defaults to the frame period.")
@click.option("--steps", type=int, default=25, show_default=True)
@_with_common
@_cli_errors
def tdma_sweep_taumax(rho, tau_from, tau_to, steps, config_path, defaults, out_dir):
    """Single-source age versus the slot budget (knee curve)."""
    config, config_dict = load_config(config_path, "tdma", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lo = tau_from if tau_from is not None else config.frame_period / 50
    hi = tau_to if tau_to is not None else config.frame_period
    taus = np.linspace(lo, hi, steps)

    def solve_point(tau_max):
        s = tdma.statistical_aoi_at_taumax(float(tau_max), rho, config)
        return (tau_max, s.tau, s.theta, s.delta, s.constrained)

    rows = _pmap(solve_point, taus)
    csv_path = out / "tdma_sweep_taumax.csv"
    _write_csv(csv_path, ["tau_max_s", "tau_opt_s", "theta", "delta_s", "constrained"], rows)
    sum_path = out / "tdma_sweep_taumax_summary.json"
    _write_summary(sum_path, {"rho": rho, "points": len(rows)})
    _finish(out, "tdma_sweep_taumax", config_dict, None, [csv_path, sum_path])


@tdma_group.command("sweep-rho")
@click.option("--from", "rho_from", type=float, default=1e-3, show_default=True)
@click.option("--to", "rho_to", type=float, default=0.1, show_default=True)
@click.option("--steps", type=int, default=10, show_default=True)
@_with_common
@_cli_errors
def tdma_sweep_rho(rho_from, rho_to, steps, config_path, defaults, out_dir):
    """Max statistical age as the first K-1 sources' rho varies, last fixed.

    Compares the optimized allocation against the equal-split baseline.
    """
    config, config_dict = load_config(config_path, "tdma", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rhos = np.exp(np.linspace(math.log(rho_from), math.log(rho_to), steps))
    equal_tau = config.frame_period / config.n_sources

    def solve_point(rho):
        varied = tdma.TdmaConfig(
            n_sources=config.n_sources,
            error_factor=config.error_factor,
            frame_period=config.frame_period,
            rhos=tuple([float(rho)] * (config.n_sources - 1) + [config.rhos[-1]]),
        )
        alloc = tdma.allocate(varied)
        d_equal = max(
            tdma.statistical_aoi_exact(equal_tau, r, varied).delta for r in varied.rhos
        )
        return (rho, alloc.delta_max, d_equal)

    rows = _pmap(solve_point, rhos)
    csv_path = out / "tdma_sweep_rho.csv"
    _write_csv(csv_path, ["rho", "delta_proposed_s", "delta_equal_split_s"], rows)
    sum_path = out / "tdma_sweep_rho_summary.json"
    _write_summary(sum_path, {"rho_fixed_last": config.rhos[-1], "points": len(rows)})
    _finish(out, "tdma_sweep_rho", config_dict, None, [csv_path, sum_path])


@tdma_group.command("frame-sweep")
@click.option("--k", type=int, default=None, help="Number of sources (defaults to config).")
@click.option("--rho", type=float, default=0.01, show_default=True,
              help="Common violation probability for all sources.")
@click.option("--from", "frame_from", type=float, default=1e-3, show_default=True)
@click.option("--to", "frame_to", type=float, default=1.0, show_default=True)
@click.option("--steps", type=int, default=30, show_default=True)
@_with_common
@_cli_errors
def tdma_frame_sweep(k, rho, frame_from, frame_to, steps, config_path, defaults, out_dir):
    """Min-max age versus the TDMA frame period."""
    config, config_dict = load_config(config_path, "tdma", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_sources = k if k is not None else config.n_sources
    frames = np.exp(np.linspace(math.log(frame_from), math.log(frame_to), steps))

    def solve_point(frame):
        cfg = tdma.TdmaConfig(
            n_sources=n_sources,
            error_factor=config.error_factor,
            frame_period=float(frame),
            rhos=(rho,) * n_sources,
        )
        alloc = tdma.allocate(cfg)
        return (frame, alloc.delta_max, alloc.equalized)

    rows = _pmap(solve_point, frames)
    csv_path = out / "tdma_frame_sweep.csv"
    _write_csv(csv_path, ["frame_s", "delta_max_s", "equalized"], rows)
    best = min(rows, key=lambda r: r[1])
    sum_path = out / "tdma_frame_sweep_summary.json"
    _write_summary(
        sum_path,
        {"k": n_sources, "rho": rho, "best_frame_s": float(best[0]), "best_delta_s": float(best[1])},
    )
    _finish(out, "tdma_frame_sweep", config_dict, None, [csv_path, sum_path])


def _write_run_outputs(out, name, run, delta, rho, extra_summary, config_dict, seed):
    samples_path = out / f"{name}_samples.csv"
    _write_csv(samples_path, ["peak_age_s"], ((s,) for s in run.samples))
    counts, edges = np.histogram(run.samples, bins=50)
    hist_path = out / f"{name}_hist.csv"
    _write_csv(
        hist_path,
        ["bin_left_s", "bin_right_s", "mass"],
        zip(edges[:-1], edges[1:], counts / run.n_events),
    )
    report = sim.check_violation(run, delta, rho)
    summary = {
        "seed": seed,
        "n_events": run.n_events,
        "delta_s": delta,
        "rho": rho,
        "violation_fraction": report.fraction,
        "violation_threshold": report.threshold,
        "violation_passed": report.passed,
        **extra_summary,
    }
    sum_path = out / f"{name}_summary.json"
    _write_summary(sum_path, summary)
    _finish(out, name, config_dict, seed, [samples_path, hist_path, sum_path])


@simulate_group.command("fading")
@click.option("--rho", type=float, default=0.5, show_default=True)
@click.option("--policy", "policy_name", default="opt", show_default=True,
              type=click.Choice(["opt", "avg", "max"]))
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--n", "n_blocks", type=int, default=20000, show_default=True,
              help="Number of coherence blocks.")
@_with_common
@_cli_errors
def simulate_fading_cmd(rho, policy_name, seed, n_blocks, config_path, defaults, out_dir):
    """Monte Carlo peak ages of a fading sampling policy."""
    config, config_dict = load_config(config_path, "fading", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    policy, result = _policy_for(policy_name, config, rho)
    delta = result.delta if result is not None else risk.evar(
        fading.peak_age_distribution(policy, config), rho
    ).delta
    run = sim.simulate_fading(policy.rates_on(config), config, seed, n_blocks)
    _write_run_outputs(
        out, "simulate_fading", run, delta, rho,
        {"policy": policy_name, "n_blocks": n_blocks}, config_dict, seed,
    )


@simulate_group.command("tdma")
@click.option("--rho", type=float, default=0.01, show_default=True)
@click.option("--source", type=int, default=None,
              help="Simulate this source of the solved allocation instead of a single-source link.")
@click.option("--seed", type=int, default=12345, show_default=True)
@click.option("--n", "n_updates", type=int, default=100000, show_default=True)
@_with_common
@_cli_errors
def simulate_tdma_cmd(rho, source, seed, n_updates, config_path, defaults, out_dir):
    """Monte Carlo peak ages of a TDMA source."""
    config, config_dict = load_config(config_path, "tdma", defaults)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if source is None:
        sol = tdma.statistical_aoi_at_taumax(config.frame_period, rho, config)
        rho_used = rho
    else:
        if not (1 <= source <= config.n_sources):
            raise StatageError(f"--source must lie in [1, {config.n_sources}]")
        alloc = tdma.allocate(config)
        sol = alloc.solutions[source - 1]
        rho_used = config.rhos[source - 1]
    run = sim.simulate_tdma(sol.tau, config.error_factor, config.frame_period, seed, n_updates)
    _write_run_outputs(
        out, "simulate_tdma", run, sol.delta, rho_used,
        {"tau_s": sol.tau, "theta": sol.theta, "n_updates": n_updates}, config_dict, seed,
    )


if __name__ == "__main__":
    main()

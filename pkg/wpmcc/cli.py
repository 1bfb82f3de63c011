"""
Command-line interface: python -m wpmcc <command> [options]

Commands:
  static-local      Optimal CPU-cycle frequencies for one channel gain
  static-offload    Optimal offloading duration for one channel gain
  mode-select       Local computing vs offloading for one channel gain
  dynamic           Data allocation over explicit block gains
  sweep             Monte-Carlo computing probability from a config file
  thresholds        Print a, a' and a'' for the given constants
  policies          List the policy catalog

Exit codes: 0 success, 1 configuration or usage error, 2 infeasible query.
"""

from __future__ import annotations

import logging
import sys

import click
import numpy as np

from wpmcc.allocation import (
    allocate_equal_local,
    allocate_equal_offload,
    allocate_local,
    allocate_offload_dp,
    allocate_offload_greedy,
)
from wpmcc.cci import ResourceLimitError, execution_probabilities, scaling_factors
from wpmcc.channel import BlockGains
from wpmcc.local import static_policy as local_static, thresholds
from wpmcc.mode import Mode, select
from wpmcc.offloading import rho, static_policy as offload_static, threshold_a2, y_of_h
from wpmcc.settings import POLICIES, POLICY_ALIASES, configure_logging
from wpmcc.simulation import ConfigError, ExperimentConfig, format_csv, load_config, parse_config, run_sweep, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2

ALLOCATORS = ["local", "offload-greedy", "offload-dp", "equal-local", "equal-offload"]


def _fmt(value: float) -> str:
    return "%.10g" % value


def _emit(**fields) -> None:
    for key, value in fields.items():
        text = _fmt(value) if isinstance(value, float) else str(value)
        click.echo(f"{key}: {text}")


def _experiment(config: str | None, **overrides) -> ExperimentConfig:
    """Constants from --config (if any), then explicit flags on top."""
    if config:
        return load_config(config, **overrides)
    return parse_config({k: v for k, v in overrides.items() if v is not None})


def system_options(func):
    """Options shared by the single-shot commands."""
    options = [
        click.option("--config", "config", type=click.Path(dir_okay=False), help="ExperimentConfig JSON for defaults."),
        click.option("--data-bits", "data_bits", type=float, help="Input size L in bits."),
        click.option("--deadline", "deadline", type=float, help="Deadline T in seconds."),
        click.option("--bs-power", "bs_power", type=float, help="BS transmission power P_b in W."),
        click.option("--bandwidth", "bandwidth", type=float, help="Bandwidth B in Hz."),
        click.option("--noise-var", "noise_var", type=float, help="Noise variance in W."),
        click.option("--upsilon", "upsilon", type=float, help="Energy conversion efficiency."),
        click.option("--gamma", "gamma", type=float, help="Switched-capacitance constant."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group()
@click.option("--log-level", default=None, help="error | warn | info | debug (default: WPMCC_LOG).")
def cli(log_level: str | None) -> None:
    """Policies and Monte-Carlo simulation for wirelessly powered mobile computing."""
    configure_logging(log_level)


@cli.command("static-local")
@click.option("--gain", "--h", "h", type=float, required=True, help="Channel power gain h.")
@system_options
def static_local_cmd(h: float, config: str | None, **overrides) -> int:
    """Optimal CPU-cycle frequencies for a static channel."""
    cfg = _experiment(config, **overrides)
    probs = execution_probabilities(cfg.cci, cfg.data_bits)
    policy = local_static(probs, cfg.local_config(), h)
    _emit(feasible="yes" if policy.feasible else "no", regime=policy.regime.value)
    if not policy.feasible:
        return EXIT_INFEASIBLE
    _emit(cycles=policy.cycles, **{"lambda": "inf" if policy.lambda_infinite else policy.lam})
    _emit(
        avg_energy_j=policy.avg_energy,
        savings_j=policy.savings,
        f_first_hz=float(policy.frequencies[0]),
        f_last_hz=float(policy.frequencies[-1]),
    )
    return EXIT_OK


@cli.command("static-offload")
@click.option("--gain", "--h", "h", type=float, required=True, help="Channel power gain h.")
@system_options
def static_offload_cmd(h: float, config: str | None, **overrides) -> int:
    """Optimal MPT/offloading time division for a static channel."""
    cfg = _experiment(config, **overrides)
    off_cfg = cfg.offload_config()
    policy = offload_static(off_cfg, h, cfg.data_bits)
    _emit(feasible="yes" if policy.feasible else "no", regime=policy.regime.value)
    if not policy.feasible:
        _emit(a2=threshold_a2(off_cfg, cfg.data_bits))
        return EXIT_INFEASIBLE
    _emit(
        duration_s=policy.duration,
        savings_j=policy.savings,
        rho_s_per_bit=rho(off_cfg, h),
        y_j_per_bit=y_of_h(off_cfg, h),
        a2=threshold_a2(off_cfg, cfg.data_bits),
    )
    return EXIT_OK


@cli.command("mode-select")
@click.option("--gain", "--h", "h", type=float, required=True, help="Channel power gain h.")
@system_options
def mode_select_cmd(h: float, config: str | None, **overrides) -> int:
    """Select local computing or offloading for a static channel."""
    cfg = _experiment(config, **overrides)
    probs = execution_probabilities(cfg.cci, cfg.data_bits)
    decision = select(
        local_static(probs, cfg.local_config(), h),
        offload_static(cfg.offload_config(), h, cfg.data_bits),
    )
    _emit(
        mode=decision.mode.value,
        delta_savings_j=decision.delta_savings,
        local_savings_j=decision.local.savings,
        offload_savings_j=decision.offload.savings,
    )
    return EXIT_INFEASIBLE if decision.mode is Mode.INFEASIBLE else EXIT_OK


@cli.command("dynamic")
@click.option("--gains", required=True, help="Comma-separated block gains h_1,...,h_M.")
@click.option("--allocator", type=click.Choice(ALLOCATORS), default="local", show_default=True)
@system_options
def dynamic_cmd(gains: str, allocator: str, config: str | None, **overrides) -> int:
    """Data allocation over M fading blocks spanning the deadline."""
    try:
        values = [float(v) for v in gains.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"gains must be numbers: {e}") from e
    if not values or any(v <= 0 for v in values):
        raise click.BadParameter("gains must be a non-empty list of positive numbers")

    cfg = _experiment(config, blocks=len(values), **overrides)
    block_gains = BlockGains(gains=np.asarray(values), block_duration=cfg.block_duration)
    factors = scaling_factors(cfg.cci, cfg.data_bits / cfg.blocks)

    if allocator == "local":
        plan = allocate_local(cfg.data_bits, block_gains, cfg.local_config(), factors, cfg.cci)
    elif allocator == "equal-local":
        plan = allocate_equal_local(cfg.data_bits, block_gains, cfg.local_config(), factors, cfg.cci)
    elif allocator == "offload-greedy":
        plan = allocate_offload_greedy(cfg.data_bits, block_gains, cfg.offload_config())
    elif allocator == "offload-dp":
        plan = allocate_offload_dp(cfg.data_bits, block_gains, cfg.offload_config(), cfg.dp_grid)
    else:
        plan = allocate_equal_offload(cfg.data_bits, block_gains, cfg.offload_config())

    _emit(feasible="yes" if plan.feasible else "no", allocator=allocator)
    if not plan.feasible:
        return EXIT_INFEASIBLE
    _emit(
        allocations_bits=",".join(_fmt(float(v)) for v in plan.allocations),
        residual_estimates_j=",".join(_fmt(float(v)) for v in plan.residual_estimates),
        total_objective_j=plan.total_objective,
        total_savings_j=plan.total_savings,
    )
    return EXIT_OK


@cli.command("sweep")
@click.option("--config", "config", type=click.Path(dir_okay=False), required=True, help="ExperimentConfig JSON.")
@click.option("--out", "out", type=click.Path(dir_okay=False), help="CSV output path (default: stdout).")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), help="Override the config seed.")
@click.option("--trials", type=click.IntRange(min=1), help="Override the trial count.")
@click.option("--threads", type=click.IntRange(min=0), help="Worker threads, 0 = auto.")
def sweep_cmd(config: str, out: str | None, seed: int | None, trials: int | None, threads: int | None) -> int:
    """Monte-Carlo computing probability for every sweep point and policy."""
    cfg = load_config(config, seed=seed, trials=trials)
    rows = run_sweep(cfg, threads=threads)
    if out:
        path = write_csv(rows, out)
        click.echo(f"✅ {len(rows)} rows written to {path}", err=True)
    else:
        click.echo(format_csv(rows), nl=False)
    return EXIT_OK


@cli.command("thresholds")
@system_options
def thresholds_cmd(config: str | None, **overrides) -> int:
    """Received-power thresholds a, a' (W) and the offloading threshold a''."""
    cfg = _experiment(config, **overrides)
    probs = execution_probabilities(cfg.cci, cfg.data_bits)
    a, a_prime = thresholds(probs, cfg.local_config())
    _emit(cycles=probs.n, a_w=a, a_prime_w=a_prime, a2=threshold_a2(cfg.offload_config(), cfg.data_bits))
    return EXIT_OK


@cli.command("policies")
def policies_cmd() -> int:
    """List the policy catalog and aliases."""
    aliases: dict[str, list[str]] = {}
    for alias, name in POLICY_ALIASES.items():
        aliases.setdefault(name, []).append(alias)
    for name, description in POLICIES.items():
        extra = f" (alias: {', '.join(aliases[name])})" if name in aliases else ""
        click.echo(f"{name:20s} {description}{extra}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def run_cli(argv: list[str] | None = None) -> int:
    """
    Run the CLI and return its exit code instead of exiting.

    Returns:
        0 on success, 1 on configuration/usage/I-O errors, 2 when a
        single-shot query is infeasible.
    """
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="wpmcc", standalone_mode=False)
    except click.exceptions.Abort:
        return EXIT_CONFIG
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except ConfigError as e:
        click.echo(f"❌ {e}", err=True)
        return EXIT_CONFIG
    except (OSError, ValueError, ResourceLimitError) as e:
        click.echo(f"❌ {e}", err=True)
        return EXIT_CONFIG
    return rv if isinstance(rv, int) else EXIT_OK


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()

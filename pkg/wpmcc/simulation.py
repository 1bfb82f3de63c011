"""
Monte-Carlo Simulation
======================

Estimates the computing probability (and mean energy savings) of every
policy in the catalog over a sweep of the deadline T or the BS power P_b.

    - ExperimentConfig / Sweep: validated experiment description (JSON file)
    - draw_trials:  common random numbers, one bundle per trial index
    - trial_success: one trial of one policy
    - estimate:     one (sweep point, policy) row
    - run_sweep:    every grid point x policy, optionally written to CSV

Trials run in fixed-size chunks on a thread pool and are reduced in chunk
order, so results do not depend on the worker count.

Usage:
    from wpmcc.simulation import load_config, run_sweep, write_csv

    cfg = load_config("configs/deadline_k0.json")
    rows = run_sweep(cfg, threads=4)
    write_csv(rows, "results/deadline_k0.csv")
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from wpmcc.allocation import (
    DpGrid,
    allocate_equal_local,
    allocate_equal_offload,
    allocate_local,
    allocate_offload_dp,
    allocate_offload_greedy,
)
from wpmcc.cci import (
    CciModel,
    ExecutionProbabilities,
    ScalingFactors,
    cycle_count,
    execution_probabilities,
    scaling_factors,
)
from wpmcc.channel import BlockGains, RicianParams, rng_stream, sample_gain
from wpmcc.local import BOUNDARY_SLACK, LocalConfig, LocalEnergyCurve, LocalPolicy, Regime, thresholds
from wpmcc.mode import Mode, select, select_dynamic
from wpmcc.offloading import OffloadConfig, equal_time_policy, static_policy as offload_static
from wpmcc.settings import STATIC_POLICIES, get_settings, resolve_policy

logger = logging.getLogger(__name__)

CSV_HEADER = "sweep_value,policy,p_c,ci,mean_savings_j,trials"
CHUNK_SIZE = 256
Z_95 = 1.96


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class Sweep(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    variable: Literal["T", "P_b"] = "T"
    grid: list[float] = Field(min_length=1)

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, grid: list[float]) -> list[float]:
        if any(v <= 0 for v in grid):
            raise ValueError("sweep grid values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        return grid


class ExperimentConfig(BaseModel):
    """
    One experiment: system constants, CCI and channel models, Monte-Carlo
    settings and the sweep. SI units throughout; T_c = T / blocks.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    data_bits: float = Field(default=1000.0, gt=0)
    deadline: float = Field(default=0.035, gt=0)
    blocks: int = Field(default=4, ge=1)
    bs_power: float = Field(default=0.5, gt=0)
    bandwidth: float = Field(default=1e6, gt=0)
    noise_var: float = Field(default=1e-9, gt=0)
    upsilon: float = Field(default=0.8, gt=0, le=1)
    gamma: float = Field(default=1e-28, gt=0)
    cci: CciModel = Field(default_factory=CciModel)
    channel: RicianParams = Field(default_factory=RicianParams)
    trials: int = Field(default=10_000, ge=1)
    seed: int = Field(default=0, ge=0, le=2 ** 64 - 1)
    sweep: Sweep | None = None
    policies: list[str] = Field(default_factory=lambda: list(STATIC_POLICIES), min_length=1)
    dp_grid: DpGrid = Field(default_factory=DpGrid)

    @field_validator("policies")
    @classmethod
    def _resolve_policies(cls, policies: list[str]) -> list[str]:
        resolved = [resolve_policy(p) for p in policies]
        if len(set(resolved)) != len(resolved):
            raise ValueError(f"duplicate policies in {policies}")
        return resolved

    @property
    def block_duration(self) -> float:
        return self.deadline / self.blocks

    @property
    def sweep_variable(self) -> str:
        return self.sweep.variable if self.sweep else "T"

    @property
    def sweep_grid(self) -> list[float]:
        if self.sweep:
            return list(self.sweep.grid)
        return [self.deadline if self.sweep_variable == "T" else self.bs_power]

    def at(self, value: float) -> "ExperimentConfig":
        """The configuration at one sweep point."""
        key = "deadline" if self.sweep_variable == "T" else "bs_power"
        return self.model_copy(update={key: float(value)})

    def local_config(self) -> LocalConfig:
        return LocalConfig(gamma=self.gamma, upsilon=self.upsilon, bs_power=self.bs_power, deadline=self.deadline)

    def offload_config(self) -> OffloadConfig:
        return OffloadConfig(
            bandwidth=self.bandwidth,
            noise_var=self.noise_var,
            upsilon=self.upsilon,
            bs_power=self.bs_power,
            deadline=self.deadline,
        )


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """
    Read an ExperimentConfig JSON file.

    Args:
        path:       JSON file with ExperimentConfig field names.
        **overrides: Field values replacing the file's (None values are skipped).

    Raises:
        ConfigError: If the file is missing, not JSON, or fails validation.
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {e}") from e


# ---------------------------------------------------------------------------
# Random draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialDraws:
    """Everything random about one trial, shared by all policies and sweep points."""

    gain: float
    cci: float
    block_gains: np.ndarray
    block_cci: np.ndarray


def draw_trial(cfg: ExperimentConfig, trial: int) -> TrialDraws:
    rng = rng_stream(cfg.seed, trial)
    gain = sample_gain(cfg.channel, rng)
    cci = float(cfg.cci.sample(rng))
    block_gains = np.array([sample_gain(cfg.channel, rng) for _ in range(cfg.blocks)])
    block_cci = np.asarray(cfg.cci.sample(rng, size=cfg.blocks), dtype=float)
    return TrialDraws(gain=gain, cci=cci, block_gains=block_gains, block_cci=block_cci)


def draw_trials(cfg: ExperimentConfig) -> list[TrialDraws]:
    return [draw_trial(cfg, t) for t in range(cfg.trials)]


# ---------------------------------------------------------------------------
# Per-point context
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4)
def _probabilities(model: CciModel, bits: float) -> ExecutionProbabilities:
    return execution_probabilities(model, bits)


@lru_cache(maxsize=4)
def _energy_curve(model: CciModel, bits: float) -> LocalEnergyCurve:
    return LocalEnergyCurve(_probabilities(model, bits))


@lru_cache(maxsize=16)
def _scaling_factors(model: CciModel, bits: float) -> ScalingFactors:
    return scaling_factors(model, bits)


class SweepContext:
    """
    Quantities shared by all trials at one sweep point.

    Heavy members are cached per (CCI model, L) across points; call
    prepare() before handing the context to worker threads.
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.local_cfg = cfg.local_config()
        self.offload_cfg = cfg.offload_config()

    @cached_property
    def probs(self) -> ExecutionProbabilities:
        return _probabilities(self.cfg.cci, self.cfg.data_bits)

    @cached_property
    def curve(self) -> LocalEnergyCurve:
        return _energy_curve(self.cfg.cci, self.cfg.data_bits)

    @cached_property
    def thresholds(self) -> tuple[float, float]:
        return thresholds(self.probs, self.local_cfg)

    @cached_property
    def equal_frequency_energy(self) -> float:
        n = self.probs.n
        return self.cfg.gamma * n * n / self.cfg.deadline ** 2 * float(np.sum(self.probs.probs))

    @cached_property
    def factors(self) -> ScalingFactors:
        return _scaling_factors(self.cfg.cci, self.cfg.data_bits / self.cfg.blocks)

    def prepare(self, policies: list[str]) -> "SweepContext":
        if {"local-opt", "mms"} & set(policies):
            _ = self.curve
        if "local-equal-freq" in policies:
            _ = self.thresholds, self.equal_frequency_energy
        if any(p.startswith("dyn-") for p in policies):
            _ = self.factors
        if {"local-opt", "local-equal-freq", "mms"} & set(policies):
            _ = self.probs
        return self


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    savings: float
    delta_savings: float = math.nan


def _local_opt(ctx: SweepContext, h: float) -> LocalPolicy:
    regime, energy = ctx.curve.evaluate(ctx.local_cfg, h)
    harvested = ctx.cfg.upsilon * ctx.cfg.bs_power * h * ctx.cfg.deadline
    feasible = regime is not Regime.INFEASIBLE
    return LocalPolicy(
        feasible=feasible,
        regime=regime,
        frequencies=np.empty(0),
        avg_energy=energy,
        savings=harvested - energy if feasible else math.nan,
    )


def _cycles_fit(model: CciModel, bits: float, cci: float) -> bool:
    """Realized cycles l X fit in the N = ceil(l N0) scheduled cycles."""
    return bits <= 0 or bits * cci <= cycle_count(model, bits)


def trial_success(policy: str, ctx: SweepContext, draws: TrialDraws) -> TrialOutcome:
    """
    One Monte-Carlo trial.

    Local modes succeed when the policy is feasible and the realized cycle
    count L X does not exceed N; offloading modes when the policy is
    feasible; mode selection when the chosen mode succeeds. Dynamic local
    plans need every block's realized cycles to fit.
    """
    cfg = ctx.cfg
    h = draws.gain

    if policy == "local-opt":
        local = _local_opt(ctx, h)
        ok = local.feasible and _cycles_fit(cfg.cci, cfg.data_bits, draws.cci)
        return TrialOutcome(ok, local.savings)

    if policy == "local-equal-freq":
        a, _ = ctx.thresholds
        feasible = cfg.bs_power * h >= a * (1.0 - BOUNDARY_SLACK)
        if not feasible:
            return TrialOutcome(False, math.nan)
        savings = cfg.upsilon * cfg.bs_power * h * cfg.deadline - ctx.equal_frequency_energy
        return TrialOutcome(_cycles_fit(cfg.cci, cfg.data_bits, draws.cci), savings)

    if policy == "offload-opt":
        off = offload_static(ctx.offload_cfg, h, cfg.data_bits)
        return TrialOutcome(off.feasible, off.savings)

    if policy == "offload-equal-time":
        off = equal_time_policy(ctx.offload_cfg, h, cfg.data_bits)
        return TrialOutcome(off.feasible, off.savings)

    if policy == "mms":
        decision = select(_local_opt(ctx, h), offload_static(ctx.offload_cfg, h, cfg.data_bits))
        if decision.mode is Mode.LOCAL:
            ok = _cycles_fit(cfg.cci, cfg.data_bits, draws.cci)
        else:
            ok = decision.mode is Mode.OFFLOAD
        return TrialOutcome(ok, decision.savings, decision.delta_savings)

    if policy in ("dyn-subopt", "dyn-dp", "dyn-equal"):
        gains = BlockGains(gains=draws.block_gains, block_duration=cfg.block_duration)
        if policy == "dyn-equal":
            local_plan = allocate_equal_local(cfg.data_bits, gains, ctx.local_cfg, ctx.factors)
            offload_plan = allocate_equal_offload(cfg.data_bits, gains, ctx.offload_cfg)
        else:
            local_plan = allocate_local(cfg.data_bits, gains, ctx.local_cfg, ctx.factors)
            if policy == "dyn-dp":
                offload_plan = allocate_offload_dp(cfg.data_bits, gains, ctx.offload_cfg, cfg.dp_grid)
            else:
                offload_plan = allocate_offload_greedy(cfg.data_bits, gains, ctx.offload_cfg)
        decision = select_dynamic(local_plan, offload_plan)
        if decision.mode is Mode.LOCAL:
            ok = all(
                _cycles_fit(cfg.cci, float(bits), float(x))
                for bits, x in zip(local_plan.allocations, draws.block_cci)
            )
        else:
            ok = decision.mode is Mode.OFFLOAD
        return TrialOutcome(ok, decision.savings, decision.delta_savings)

    raise ValueError(f"Unknown policy '{policy}'")


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    policy: str
    p_c: float
    ci: float
    mean_savings: float
    trials: int

    def to_dict(self) -> dict:
        return {
            "sweep_value": self.sweep_value,
            "policy": self.policy,
            "p_c": self.p_c,
            "ci": self.ci,
            "mean_savings_j": self.mean_savings,
            "trials": self.trials,
        }


def confidence_halfwidth(p: float, n: int) -> float:
    """95% normal-approximation half-width, clamped so p +- ci stays in [0, 1]."""
    half = Z_95 * math.sqrt(p * (1.0 - p) / n)
    return min(half, p, 1.0 - p)


def resolve_threads(threads: int | None) -> int:
    """Worker count: explicit value, else the WPMCC_THREADS setting, 0 meaning auto."""
    if threads is None:
        threads = get_settings()["threads"]
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    return threads or min(32, os.cpu_count() or 1)


def _run_chunk(policy: str, ctx: SweepContext, draws: list[TrialDraws]) -> tuple[int, float, int, np.ndarray]:
    successes, savings_sum, feasible = 0, 0.0, 0
    deltas = np.full(len(draws), math.nan)
    for i, d in enumerate(draws):
        outcome = trial_success(policy, ctx, d)
        successes += outcome.success
        if not math.isnan(outcome.savings):
            savings_sum += outcome.savings
            feasible += 1
        deltas[i] = outcome.delta_savings
    return successes, savings_sum, feasible, deltas


def _estimate(
    policy: str,
    ctx: SweepContext,
    draws: list[TrialDraws],
    sweep_value: float,
    pool: ThreadPoolExecutor | None,
) -> tuple[SweepRow, np.ndarray]:
    chunks = [draws[i:i + CHUNK_SIZE] for i in range(0, len(draws), CHUNK_SIZE)]
    if pool is None:
        results = [_run_chunk(policy, ctx, c) for c in chunks]
    else:
        results = list(pool.map(lambda c: _run_chunk(policy, ctx, c), chunks))

    successes = sum(r[0] for r in results)
    savings_sum = 0.0
    for r in results:
        savings_sum += r[1]
    feasible = sum(r[2] for r in results)
    n = len(draws)
    p = successes / n
    row = SweepRow(
        sweep_value=float(sweep_value),
        policy=policy,
        p_c=p,
        ci=confidence_halfwidth(p, n),
        mean_savings=savings_sum / feasible if feasible else math.nan,
        trials=n,
    )
    deltas = np.concatenate([r[3] for r in results]) if results else np.empty(0)
    return row, deltas


def estimate(
    policy: str,
    cfg: ExperimentConfig,
    threads: int | None = None,
    draws: list[TrialDraws] | None = None,
) -> SweepRow:
    """
    Computing probability of one policy at the configuration's own point.

    Args:
        policy:  Policy name or alias.
        cfg:     Experiment configuration (its sweep is ignored).
        threads: Worker threads (None = setting, 0 = auto).
        draws:   Pre-drawn trials; drawn from cfg.seed when omitted.
    """
    policy = resolve_policy(policy)
    draws = draws if draws is not None else draw_trials(cfg)
    ctx = SweepContext(cfg).prepare([policy])
    value = cfg.deadline if cfg.sweep_variable == "T" else cfg.bs_power
    workers = resolve_threads(threads)
    if workers <= 1:
        return _estimate(policy, ctx, draws, value, None)[0]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return _estimate(policy, ctx, draws, value, pool)[0]


def _check_mode_trend(grid: list[float], deltas: list[np.ndarray]) -> int:
    """Trials whose delta_savings turns negative and later non-negative again as T grows."""
    if len(deltas) < 2:
        return 0
    stacked = np.vstack(deltas)                  # (points, trials)
    reversals = 0
    for column in stacked.T:
        signs = column[~np.isnan(column)] >= 0
        went_local = False
        for offload in signs:
            if not offload:
                went_local = True
            elif went_local:
                reversals += 1
                break
    if reversals:
        logger.warning(
            "Mode selection flipped back to offloading as T grew in %d trial(s) over T in [%g, %g]",
            reversals, grid[0], grid[-1],
        )
    return reversals


def run_sweep(cfg: ExperimentConfig, threads: int | None = None) -> list[SweepRow]:
    """
    Estimate every (sweep point, policy) pair.

    All points and policies see the same trial draws. Rows are ordered by
    sweep value, then by the configured policy order.
    """
    draws = draw_trials(cfg)
    workers = resolve_threads(threads)
    grid = cfg.sweep_grid
    logger.info(
        "Sweep over %s: %d points x %d policies, %d trials, %d worker(s)",
        cfg.sweep_variable, len(grid), len(cfg.policies), cfg.trials, workers,
    )

    rows: list[SweepRow] = []
    mms_deltas: list[np.ndarray] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for value in grid:
            ctx = SweepContext(cfg.at(value)).prepare(cfg.policies)
            for policy in cfg.policies:
                row, deltas = _estimate(policy, ctx, draws, value, pool)
                rows.append(row)
                if policy == "mms":
                    mms_deltas.append(deltas)
                logger.info("%s=%g %-20s p_c=%.4f +- %.4f", cfg.sweep_variable, value, policy, row.p_c, row.ci)
    finally:
        if pool is not None:
            pool.shutdown()

    if cfg.sweep_variable == "T":
        _check_mode_trend(grid, mms_deltas)
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return "%.10g" % value


def format_csv(rows: list[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join([_fmt(r.sweep_value), r.policy, _fmt(r.p_c), _fmt(r.ci), _fmt(r.mean_savings), str(r.trials)]))
    return "\n".join(lines) + "\n"


def write_csv(rows: list[SweepRow], path: str | Path) -> Path:
    """Write rows as UTF-8 CSV with LF line endings; parent dirs are created."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_csv(rows))
    logger.info("Wrote %d rows to %s", len(rows), path)
    return path


def pivot_rows(rows: list[SweepRow]) -> list[dict]:
    """One dict per sweep value with one p_c column per policy, for plotting."""
    table: dict[float, dict] = {}
    for r in rows:
        table.setdefault(r.sweep_value, {"sweep_value": r.sweep_value})[r.policy] = r.p_c
    return [table[v] for v in sorted(table)]

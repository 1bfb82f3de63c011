"""
Data Allocation over Fading Blocks
==================================

Master problems of the dynamic channel: split L input bits over M fading
blocks of duration T_c, each block then solved by its slave policy.

Local computing (approximate, convex):
    - residual_estimates_local: R_n ~ phi_bar (v P_b h_{n-1} T_c + R_{n-1})
    - ghat_loc:                 per-block energy surrogate, cubic then quartic bridge
    - allocate_local:           equalize dG/dl = xi across blocks, capped at b'_n

Offloading:
    - allocate_offload_greedy:  fill blocks in ascending y(h) order up to their caps
    - allocate_offload_dp:      Bellman recursion over (remaining bits, residual energy)

Baselines:
    - allocate_equal, allocate_equal_local, allocate_equal_offload
    - dp_data_allocation / suboptimal_data_allocation: both modes, best one selected

Usage:
    from wpmcc.allocation import allocate_local, allocate_offload_greedy
    from wpmcc.cci import CciModel, scaling_factors

    factors = scaling_factors(CciModel(), 250)
    plan = allocate_local(1000, gains, local_cfg, factors)
    plan.allocations, plan.feasible
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from wpmcc.cci import CciModel, ScalingFactors, execution_probabilities
from wpmcc.channel import BlockGains
from wpmcc.local import LocalConfig, LocalPolicy, slave_policy as local_slave
from wpmcc.mode import ModeDecision, select_dynamic
from wpmcc.numerics import RootBracket, bisect_monotone
from wpmcc.offloading import (
    OffloadConfig,
    OffloadPolicy,
    OffloadRegime,
    block_savings_table,
    rho,
    slave_policy as offload_slave,
    y_of_h,
)

logger = logging.getLogger(__name__)

CONSERVATION_SLACK = 1e-12


@dataclass(frozen=True)
class AllocationPlan:
    """
    Result of a data allocation over M blocks.

    total_objective is the total energy for local plans and the total
    savings for offload plans; total_savings is comparable across both.
    realized_residuals holds the exact residual entering each block when
    the per-block slave problems were solved.
    """

    mode: str
    feasible: bool
    allocations: np.ndarray
    residual_estimates: np.ndarray
    total_objective: float
    total_savings: float
    per_block: tuple[LocalPolicy | OffloadPolicy, ...] = ()
    realized_residuals: np.ndarray | None = field(default=None, repr=False)

    @property
    def savings(self) -> float:
        return self.total_savings

    @property
    def m(self) -> int:
        return int(self.allocations.size)


class DpGrid(BaseModel):
    """Discretization of the offloading DP."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    energy_levels: int = Field(default=200, ge=2)
    data_levels: int = Field(default=100, ge=2)


def _infeasible_plan(mode: str, m: int, residual_estimates: np.ndarray | None = None) -> AllocationPlan:
    return AllocationPlan(
        mode=mode,
        feasible=False,
        allocations=np.full(m, math.nan),
        residual_estimates=residual_estimates if residual_estimates is not None else np.zeros(m),
        total_objective=math.nan,
        total_savings=math.nan,
    )


def _harvest_per_block(gains: BlockGains, upsilon: float, bs_power: float) -> np.ndarray:
    return upsilon * bs_power * gains.gains * gains.block_duration


def allocate_equal(total_bits: float, m: int) -> np.ndarray:
    """l_n = L / m."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return np.full(m, total_bits / m)


# ---------------------------------------------------------------------------
# Local computing
# ---------------------------------------------------------------------------

def residual_estimates_local(gains: BlockGains, cfg: LocalConfig, factors: ScalingFactors) -> np.ndarray:
    """
    Residual-energy estimates R_1..R_M with R_1 = 0.

    Each block is assumed to spend the fraction phi1/theta1 of the energy
    available to it, so the estimate is a lower bound on the true residual.
    """
    phi_bar = max(factors.phi_bar, 0.0)
    harvested = _harvest_per_block(gains, cfg.upsilon, cfg.bs_power)
    estimates = np.zeros(gains.m)
    for n in range(1, gains.m):
        estimates[n] = phi_bar * (harvested[n - 1] + estimates[n - 1])
    return estimates


@dataclass(frozen=True)
class GhatBlock:
    """
    Energy surrogate of one block:

        g(l) = k phi0 l^3                                   l <= b
        g(l) = k (D (l - b)^4 + phi0) l^3,  D = (phi1 - phi0)/(b' - b)^4   b < l <= b'

    with k = gamma / T_c^2.
    """

    k: float
    phi0: float
    phi1: float
    b: float
    b_prime: float

    @classmethod
    def build(cls, r_hat: float, h: float, cfg: LocalConfig, factors: ScalingFactors) -> "GhatBlock":
        t = cfg.deadline
        budget = (cfg.upsilon * cfg.bs_power * h * t ** 3 + r_hat * t * t) / cfg.gamma
        return cls(
            k=cfg.gamma / (t * t),
            phi0=factors.phi0,
            phi1=factors.phi1,
            b=float(np.cbrt(budget / factors.theta0)),
            b_prime=float(np.cbrt(budget / factors.theta1)),
        )

    @property
    def _bridge(self) -> float:
        return (self.phi1 - self.phi0) / (self.b_prime - self.b) ** 4

    def value(self, bits: float) -> float:
        if bits > self.b_prime * (1.0 + CONSERVATION_SLACK):
            return math.inf
        if bits <= self.b or self.b_prime <= self.b:
            return self.k * self.phi0 * bits ** 3
        phi = self._bridge * (bits - self.b) ** 4 + self.phi0
        return self.k * phi * bits ** 3

    def derivative(self, bits: float) -> float:
        if bits <= self.b or self.b_prime <= self.b:
            return 3.0 * self.k * self.phi0 * bits * bits
        d = self._bridge
        u = bits - self.b
        phi = d * u ** 4 + self.phi0
        return self.k * (4.0 * d * u ** 3 * bits ** 3 + 3.0 * phi * bits * bits)

    def inverse_derivative(self, xi: float) -> float:
        """Bits l in [0, b'] with g'(l) = xi, capped at b'."""
        if xi <= 0:
            return 0.0
        if self.derivative(self.b_prime) <= xi:
            return self.b_prime
        cubic = math.sqrt(xi / (3.0 * self.k * self.phi0))
        if cubic <= self.b:
            return cubic
        scale = self.derivative(self.b_prime)
        bracket = RootBracket(lo=self.b, hi=self.b_prime, tol_abs=1e-14, tol_rel=1e-13)
        return bisect_monotone(lambda x: (self.derivative(x) - xi) / scale, bracket)


def ghat_loc(bits: float, r_hat: float, h: float, cfg: LocalConfig, factors: ScalingFactors) -> float:
    """
    Approximate minimum average energy of a block holding `bits`.

    Args:
        bits:    Block input size l (>= 0).
        r_hat:   Residual-energy estimate for the block.
        h:       Block channel power gain.
        cfg:     Local-computing constants with deadline = T_c.
        factors: Scaling factors of the CCI model.

    Returns:
        Energy in joules, or math.inf when l exceeds the feasibility cap b'.
    """
    return GhatBlock.build(r_hat, h, cfg, factors).value(bits)


def _local_plan(
    mode: str,
    allocations: np.ndarray,
    gains: BlockGains,
    cfg: LocalConfig,
    estimates: np.ndarray,
    blocks: list[GhatBlock],
    model: CciModel | None,
) -> AllocationPlan:
    harvested = _harvest_per_block(gains, cfg.upsilon, cfg.bs_power)
    approx = [blk.value(bits) for blk, bits in zip(blocks, allocations)]
    feasible = all(math.isfinite(g) for g in approx)
    objective = float(sum(approx)) if feasible else math.nan

    per_block: tuple[LocalPolicy, ...] = ()
    realized = None
    if model is not None and feasible:
        policies = []
        realized = np.full(gains.m, math.nan)
        residual = 0.0
        for n, (bits, h) in enumerate(zip(allocations, gains.gains)):
            realized[n] = residual
            probs = execution_probabilities(model, bits) if bits > 0 else None
            policy = local_slave(probs, cfg, float(h), residual)
            policies.append(policy)
            if not policy.feasible:
                logger.info("Block %d infeasible under exact solve (l=%.6g, R=%.6g)", n + 1, bits, residual)
                feasible = False
                break
            residual = max(residual + harvested[n] - policy.avg_energy, 0.0)
        per_block = tuple(policies)
        if feasible:
            objective = float(sum(p.avg_energy for p in policies))
        else:
            objective = math.nan

    return AllocationPlan(
        mode=mode,
        feasible=feasible,
        allocations=allocations,
        residual_estimates=estimates,
        total_objective=objective,
        total_savings=float(np.sum(harvested)) - objective if feasible else math.nan,
        per_block=per_block,
        realized_residuals=realized,
    )


def allocate_local(
    total_bits: float,
    gains: BlockGains,
    cfg: LocalConfig,
    factors: ScalingFactors,
    model: CciModel | None = None,
) -> AllocationPlan:
    """
    Sub-optimal data allocation for local computing.

    Finds xi >= 0 with sum_n min(b_n(xi), b'_n) = L, where b_n inverts the
    derivative of the block surrogate. Every block receives a positive share.

    Args:
        total_bits: L (> 0).
        gains:      Block gains and block duration T_c.
        cfg:        Local-computing constants; the deadline is replaced by T_c.
        factors:    Scaling factors of the CCI model.
        model:      CCI model; when given, each block's exact slave problem is
                    solved and exact residuals are tracked.

    Returns:
        AllocationPlan, infeasible when L > sum b'_n.
    """
    if not total_bits > 0:
        raise ValueError(f"total_bits must be positive, got {total_bits}")
    cfg = cfg.with_deadline(gains.block_duration)
    estimates = residual_estimates_local(gains, cfg, factors)
    blocks = [GhatBlock.build(r, float(h), cfg, factors) for r, h in zip(estimates, gains.gains)]
    caps = np.array([blk.b_prime for blk in blocks])

    if total_bits > caps.sum() * (1.0 + CONSERVATION_SLACK):
        logger.debug("Local allocation infeasible: L=%.6g > sum b'=%.6g", total_bits, caps.sum())
        return _infeasible_plan("local", gains.m, estimates)

    if gains.m == 1:
        allocations = np.array([float(total_bits)])
    elif total_bits >= caps.sum():
        allocations = caps * (total_bits / caps.sum())
    else:
        xi_max = max(blk.derivative(blk.b_prime) for blk in blocks)

        def shortfall(u: float) -> float:
            xi = u * xi_max
            return sum(blk.inverse_derivative(xi) for blk in blocks) / total_bits - 1.0

        u = bisect_monotone(shortfall, RootBracket(lo=0.0, hi=1.0, tol_abs=1e-14, tol_rel=1e-13))
        allocations = np.array([blk.inverse_derivative(u * xi_max) for blk in blocks])
        # absorb the bisection residue in the uncapped blocks
        free = allocations < caps
        if not free.any():
            free = np.ones_like(free)
        excess = allocations.sum() - total_bits
        allocations[free] -= excess * allocations[free] / allocations[free].sum()
        logger.debug("xi=%.6g, allocations=%s", u * xi_max, allocations)

    return _local_plan("local", allocations, gains, cfg, estimates, blocks, model)


def allocate_equal_local(
    total_bits: float,
    gains: BlockGains,
    cfg: LocalConfig,
    factors: ScalingFactors,
    model: CciModel | None = None,
) -> AllocationPlan:
    """Equal allocation judged by the block surrogates (and exact solves with a model)."""
    cfg = cfg.with_deadline(gains.block_duration)
    estimates = residual_estimates_local(gains, cfg, factors)
    blocks = [GhatBlock.build(r, float(h), cfg, factors) for r, h in zip(estimates, gains.gains)]
    allocations = allocate_equal(total_bits, gains.m)
    return _local_plan("local-equal", allocations, gains, cfg, estimates, blocks, model)


# ---------------------------------------------------------------------------
# Offloading
# ---------------------------------------------------------------------------

def _offload_plan(
    mode: str,
    allocations: np.ndarray,
    gains: BlockGains,
    cfg: OffloadConfig,
) -> AllocationPlan:
    """Solve the slave problems in block order, tracking the exact residual."""
    policies = []
    realized = np.zeros(gains.m)
    residual = 0.0
    for n, (bits, h) in enumerate(zip(allocations, gains.gains)):
        realized[n] = residual
        policy = offload_slave(cfg, float(h), float(bits), residual)
        policies.append(policy)
        if not policy.feasible:
            return AllocationPlan(
                mode=mode, feasible=False, allocations=allocations, residual_estimates=np.zeros(gains.m),
                total_objective=math.nan, total_savings=math.nan,
                per_block=tuple(policies), realized_residuals=realized,
            )
        residual = max(residual + policy.savings, 0.0)
    total = float(sum(p.savings for p in policies))
    return AllocationPlan(
        mode=mode, feasible=True, allocations=allocations, residual_estimates=np.zeros(gains.m),
        total_objective=total, total_savings=total,
        per_block=tuple(policies), realized_residuals=realized,
    )


def allocate_offload_greedy(total_bits: float, gains: BlockGains, cfg: OffloadConfig) -> AllocationPlan:
    """
    Greedy data allocation for offloading with residual energy set to zero.

    Blocks are visited by ascending y(h) (ties by block index) and filled to
    their cap v P_b h T_c / y(h) until L is exhausted.

    Returns:
        AllocationPlan, infeasible when the caps sum to less than L.
    """
    cfg = cfg.with_deadline(gains.block_duration)
    y = np.array([y_of_h(cfg, float(h)) for h in gains.gains])
    caps = _harvest_per_block(gains, cfg.upsilon, cfg.bs_power) / y
    # a block whose gain sits at the W branch point cannot send anything
    caps = np.where([math.isfinite(rho(cfg, float(h))) for h in gains.gains], caps, 0.0)
    if total_bits > caps.sum() * (1.0 + CONSERVATION_SLACK):
        logger.debug("Greedy offload infeasible: L=%.6g > sum caps=%.6g", total_bits, caps.sum())
        return _infeasible_plan("offload", gains.m)

    allocations = np.zeros(gains.m)
    remaining = float(total_bits)
    for n in np.argsort(y, kind="stable"):
        take = min(caps[n], remaining)
        allocations[n] = take
        remaining -= take
        if remaining <= 0:
            break

    policies = []
    realized = np.zeros(gains.m)
    residual = 0.0
    for n, (bits, h) in enumerate(zip(allocations, gains.gains)):
        realized[n] = residual
        harvested = cfg.harvested(float(h))
        savings = max(harvested - y[n] * bits, 0.0)
        duration = min(rho(cfg, float(h)) * bits, cfg.deadline) if bits > 0 else 0.0
        policies.append(OffloadPolicy(True, OffloadRegime.INTERIOR, duration=duration, savings=savings))
        residual += savings
    total = float(sum(p.savings for p in policies))
    return AllocationPlan(
        mode="offload", feasible=True, allocations=allocations, residual_estimates=np.zeros(gains.m),
        total_objective=total, total_savings=total, per_block=tuple(policies), realized_residuals=realized,
    )


def allocate_offload_dp(
    total_bits: float,
    gains: BlockGains,
    cfg: OffloadConfig,
    grid: DpGrid | None = None,
) -> AllocationPlan:
    """
    Offloading data allocation by backward induction.

    State: (remaining bits on a uniform data grid over [0, L], residual energy
    on a uniform grid over [0, sum v P_b h_n T_c]). A stage allocates a whole
    number of data steps, earns G_off(l, R, h_n) and moves the residual to
    R + G, snapped down to the energy grid. Residuals must stay non-negative
    and all bits must be allocated after block M.

    The forward pass re-solves each block at its exact residual, so reported
    savings are never below the grid's.
    """
    grid = grid or DpGrid()
    cfg = cfg.with_deadline(gains.block_duration)
    m = gains.m
    n_e, n_d = grid.energy_levels, grid.data_levels

    bits_grid = np.linspace(0.0, float(total_bits), n_d)
    e_max = float(_harvest_per_block(gains, cfg.upsilon, cfg.bs_power).sum())
    energy_grid = np.linspace(0.0, e_max, n_e)
    e_step = energy_grid[1] - energy_grid[0] if e_max > 0 else 1.0

    rem_idx = np.arange(n_d)[:, None] - np.arange(n_d)[None, :]   # j - k
    valid = rem_idx >= 0
    rem_idx = np.clip(rem_idx, 0, None)

    # value[j, i]: best savings from the next block on, j data steps left, residual level i
    value = np.full((n_d, n_e), -np.inf)
    value[0, :] = 0.0
    choices = []
    for n in range(m - 1, -1, -1):
        table = block_savings_table(cfg, float(gains.gains[n]), bits_grid, energy_grid)   # (I, K)
        after = energy_grid[:, None] + table
        table = np.where(after >= -1e-12 * (1.0 + energy_grid[:, None]), table, -np.inf)
        next_i = np.where(
            np.isfinite(table), np.floor(np.maximum(after, 0.0) / e_step + 1e-9), 0
        ).astype(int)
        next_i = np.clip(next_i, 0, n_e - 1)

        # cand[i, j, k] = G(i, k) + value[j - k, next_i(i, k)]
        future = value[rem_idx[None, :, :], next_i[:, None, :]]
        cand = table[:, None, :] + future
        cand = np.where(valid[None, :, :], cand, -np.inf)
        best_k = np.argmax(cand, axis=2)                     # (I, J)
        value = np.take_along_axis(cand, best_k[:, :, None], axis=2)[:, :, 0].T
        choices.append((best_k, next_i))
        logger.debug("DP stage %d: best value %.6g", n + 1, np.max(value))
    choices.reverse()

    if not np.isfinite(value[n_d - 1, 0]):
        return _infeasible_plan("offload", m)

    steps = np.zeros(m, dtype=int)
    j, i = n_d - 1, 0
    for n, (best_k, next_i) in enumerate(choices):
        k = int(best_k[i, j])
        steps[n] = k
        j, i = j - k, int(next_i[i, k])
    allocations = bits_grid[steps]
    return _offload_plan("offload", allocations, gains, cfg)


def allocate_equal_offload(total_bits: float, gains: BlockGains, cfg: OffloadConfig) -> AllocationPlan:
    """Equal allocation, blocks solved in order with exact residual tracking."""
    cfg = cfg.with_deadline(gains.block_duration)
    return _offload_plan("offload-equal", allocate_equal(total_bits, gains.m), gains, cfg)


# ---------------------------------------------------------------------------
# Combined policies
# ---------------------------------------------------------------------------

def suboptimal_data_allocation(
    total_bits: float,
    gains: BlockGains,
    local_cfg: LocalConfig,
    offload_cfg: OffloadConfig,
    factors: ScalingFactors,
    model: CciModel | None = None,
) -> ModeDecision:
    """Sub-optimal local allocation vs greedy offloading, better mode selected."""
    return select_dynamic(
        allocate_local(total_bits, gains, local_cfg, factors, model),
        allocate_offload_greedy(total_bits, gains, offload_cfg),
    )


def dp_data_allocation(
    total_bits: float,
    gains: BlockGains,
    local_cfg: LocalConfig,
    offload_cfg: OffloadConfig,
    factors: ScalingFactors,
    grid: DpGrid | None = None,
    model: CciModel | None = None,
) -> ModeDecision:
    """Sub-optimal local allocation vs DP offloading, better mode selected."""
    return select_dynamic(
        allocate_local(total_bits, gains, local_cfg, factors, model),
        allocate_offload_dp(total_bits, gains, offload_cfg, grid),
    )


def equal_data_allocation(
    total_bits: float,
    gains: BlockGains,
    local_cfg: LocalConfig,
    offload_cfg: OffloadConfig,
    factors: ScalingFactors,
    model: CciModel | None = None,
) -> ModeDecision:
    """Equal split in both modes, better mode selected."""
    return select_dynamic(
        allocate_equal_local(total_bits, gains, local_cfg, factors, model),
        allocate_equal_offload(total_bits, gains, offload_cfg),
    )

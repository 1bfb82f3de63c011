"""
Local Computing Policies
========================

Energy-minimal CPU-cycle frequencies for local computing while the mobile
harvests power from the BS, under a computing deadline.

    - thresholds:      received-power thresholds a (feasibility) and a'
                       (harvesting constraint inactive)
    - solve_lambda:    multiplier of the energy-harvesting constraint
    - static_policy:   static channel, no residual energy
    - slave_policy:    one fading block with residual energy R
    - equal_frequency_policy: the f_k = N/T baseline

All three regimes derive from a single equation in lambda:

    (sum (p_k + lambda)^1/3)^2 (sum (p_k + lambda)^-2/3) = (v P_b h T^3 + R T^2) / gamma

whose left side decreases from a' v T^3/gamma (lambda = 0) to N^3 (lambda -> inf).

Usage:
    from wpmcc.cci import CciModel, execution_probabilities
    from wpmcc.local import LocalConfig, static_policy

    probs = execution_probabilities(CciModel(), 1000)
    cfg = LocalConfig(gamma=1e-28, upsilon=0.8, bs_power=0.5, deadline=0.035)
    policy = static_policy(probs, cfg, h=1e-5)
    policy.regime, policy.avg_energy
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from wpmcc.cci import CciModel, ExecutionProbabilities, execution_probabilities
from wpmcc.numerics import BracketError, bisect_monotone, expand_upper_bracket

logger = logging.getLogger(__name__)

# Relative slack when comparing the energy budget with N^3 (lambda = inf boundary)
BOUNDARY_SLACK = 1e-12


class InfeasibleError(ValueError):
    """The received power lies outside the range a multiplier exists for."""


class Regime(str, Enum):
    INFEASIBLE = "infeasible"
    HARVEST_LIMITED = "harvest-limited"
    HARVEST_UNCONSTRAINED = "harvest-unconstrained"


class LocalConfig(BaseModel):
    """Constants of the local-computing problem."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(default=1e-28, gt=0)
    upsilon: float = Field(default=0.8, gt=0, le=1)
    bs_power: float = Field(default=0.5, gt=0)
    deadline: float = Field(default=0.035, gt=0)

    def with_deadline(self, deadline: float) -> "LocalConfig":
        return self.model_copy(update={"deadline": deadline})


@dataclass(frozen=True)
class LocalPolicy:
    """Outcome of a CPU-cycle frequency optimization."""

    feasible: bool
    regime: Regime
    frequencies: np.ndarray = field(repr=False)
    lam: float = 0.0
    lambda_infinite: bool = False
    avg_energy: float = math.nan
    savings: float = math.nan

    @property
    def cycles(self) -> int:
        return int(self.frequencies.size)

    @property
    def total_time(self) -> float:
        return float(np.sum(1.0 / self.frequencies)) if self.cycles else 0.0


def _infeasible() -> LocalPolicy:
    return LocalPolicy(feasible=False, regime=Regime.INFEASIBLE, frequencies=np.empty(0))


# ---------------------------------------------------------------------------
# Power sums
# ---------------------------------------------------------------------------

def _power_sums(p: np.ndarray, lam: float) -> tuple[float, float, float]:
    """(sum q^1/3, sum q^-2/3, sum p q^-2/3) with q = p + lambda."""
    q = p + lam
    cbrt = np.cbrt(q)
    inv = 1.0 / (cbrt * cbrt)
    return float(np.sum(cbrt)), float(np.sum(inv)), float(np.sum(p * inv))


def harvest_ratio(p: np.ndarray, lam: float) -> float:
    """Left side of the lambda equation, (sum q^1/3)^2 (sum q^-2/3)."""
    s_cbrt, s_inv, _ = _power_sums(p, lam)
    return s_cbrt * s_cbrt * s_inv


def energy_budget(cfg: LocalConfig, h: float, residual: float = 0.0) -> float:
    """(v P_b h T^3 + R T^2) / gamma, the right side of the lambda equation."""
    t = cfg.deadline
    return (cfg.upsilon * cfg.bs_power * h * t + residual) * t * t / cfg.gamma


def thresholds(probs: ExecutionProbabilities, cfg: LocalConfig) -> tuple[float, float]:
    """
    Received-power thresholds (a, a') in units of P_b * h.

        a  = gamma N^3 / (v T^3)
        a' = gamma / (v T^3) (sum p^1/3)^2 (sum p^-2/3)

    Returns:
        (a, a_prime) with a <= a_prime, equality iff all p_k are equal.
    """
    scale = cfg.gamma / (cfg.upsilon * cfg.deadline ** 3)
    n = float(probs.n)
    return scale * n ** 3, scale * harvest_ratio(probs.positive(), 0.0)


def _solve_ratio(p: np.ndarray, target: float) -> float:
    """lambda > 0 with harvest_ratio(p, lambda) = target; inf at the N^3 boundary."""
    n3 = float(p.size) ** 3
    if target <= n3 * (1.0 + BOUNDARY_SLACK):
        return math.inf

    def residual(lam: float) -> float:
        return harvest_ratio(p, lam) / target - 1.0

    try:
        bracket = expand_upper_bracket(residual, 0.0, tol_abs=1e-14, tol_rel=1e-12)
    except BracketError:
        # the ratio is within rounding of N^3 over the whole reachable range
        logger.debug("lambda bracket hit the ceiling for target/N^3-1=%.3g", target / n3 - 1.0)
        return math.inf
    lam = bisect_monotone(residual, bracket, direction="decreasing")
    logger.debug("lambda=%.6g (residual %.2g)", lam, residual(lam))
    return lam


def solve_lambda(
    probs: ExecutionProbabilities,
    cfg: LocalConfig,
    received_power: float,
    residual: float = 0.0,
) -> float:
    """
    Multiplier lambda of the energy-harvesting constraint.

    Args:
        probs:          Execution probabilities.
        cfg:            Local-computing constants.
        received_power: P_b * h in watts.
        residual:       Residual energy R in joules carried into the deadline.

    Returns:
        lambda > 0, or math.inf exactly at the lower threshold.

    Raises:
        InfeasibleError: If the energy budget lies outside [N^3, ratio(0)),
                         i.e. received power outside [a, a') when R = 0.
    """
    p = probs.positive()
    target = energy_budget(cfg, received_power / cfg.bs_power, residual)
    n3 = float(probs.n) ** 3
    upper = harvest_ratio(p, 0.0)
    if target < n3 * (1.0 - BOUNDARY_SLACK) or target >= upper:
        a, a_prime = thresholds(probs, cfg)
        raise InfeasibleError(
            f"received power {received_power:.6g} W outside [a, a') = [{a:.6g}, {a_prime:.6g})"
        )
    return _solve_ratio(p, target)


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

def _policy(probs: ExecutionProbabilities, cfg: LocalConfig, h: float, residual: float) -> LocalPolicy:
    t = cfg.deadline
    p = probs.positive()
    n = probs.n
    target = energy_budget(cfg, h, residual)
    n3 = float(n) ** 3
    harvested = cfg.upsilon * cfg.bs_power * h * t

    if target < n3 * (1.0 - BOUNDARY_SLACK):
        return _infeasible()

    upper = harvest_ratio(p, 0.0)
    if target >= upper:
        lam = 0.0
        regime = Regime.HARVEST_UNCONSTRAINED
    else:
        lam = _solve_ratio(p, target)
        regime = Regime.HARVEST_LIMITED

    if math.isinf(lam):
        freqs = np.full(n, n / t)
        energy = cfg.gamma * n * n / (t * t) * float(np.sum(probs.probs))
    else:
        q = p + lam
        cbrt = np.cbrt(q)
        s_cbrt = float(np.sum(cbrt))
        freqs = (s_cbrt / t) / cbrt
        energy = cfg.gamma / (t * t) * s_cbrt * s_cbrt * float(np.sum(p / (cbrt * cbrt)))

    return LocalPolicy(
        feasible=True,
        regime=regime,
        frequencies=freqs,
        lam=lam,
        lambda_infinite=math.isinf(lam),
        avg_energy=energy,
        savings=harvested - energy,
    )


def static_policy(probs: ExecutionProbabilities, cfg: LocalConfig, h: float) -> LocalPolicy:
    """
    Optimal CPU-cycle frequencies for a static channel.

    Args:
        probs: Execution probabilities for the input size L.
        cfg:   Local-computing constants (deadline = T).
        h:     Channel power gain.

    Returns:
        LocalPolicy: infeasible if P_b h < a; harvest-limited with
        f_k = (1/T) sum (p_m + lambda)^1/3 (p_k + lambda)^-1/3 if a <= P_b h < a';
        harvest-unconstrained (lambda = 0) otherwise. savings = v P_b h T - E.
    """
    return _policy(probs, cfg, h, 0.0)


def slave_policy(
    probs: ExecutionProbabilities | None,
    cfg: LocalConfig,
    h: float,
    residual: float = 0.0,
) -> LocalPolicy:
    """
    Optimal CPU-cycle frequencies for one fading block with residual energy.

    Args:
        probs:    Execution probabilities for the block's input size l, or None
                  when l = 0.
        cfg:      Local-computing constants with deadline = T_c.
        h:        Block channel power gain.
        residual: Residual energy R >= 0 carried into the block.

    Returns:
        LocalPolicy with avg_energy = G_loc(l, R, h) and savings = v P_b h T_c - G_loc.
        The regime boundaries are the cycle-exact data thresholds b, b'.
    """
    if residual < 0:
        raise ValueError(f"residual must be non-negative, got {residual}")
    if probs is None or probs.n == 0:
        return LocalPolicy(
            feasible=True,
            regime=Regime.HARVEST_UNCONSTRAINED,
            frequencies=np.empty(0),
            avg_energy=0.0,
            savings=cfg.upsilon * cfg.bs_power * h * cfg.deadline,
        )
    return _policy(probs, cfg, h, residual)


def slave_policy_for_bits(
    model: CciModel,
    bits: float,
    cfg: LocalConfig,
    h: float,
    residual: float = 0.0,
) -> LocalPolicy:
    """slave_policy for a raw input size, building the probabilities."""
    probs = execution_probabilities(model, bits) if bits > 0 else None
    return slave_policy(probs, cfg, h, residual)


def equal_frequency_policy(
    probs: ExecutionProbabilities,
    cfg: LocalConfig,
    h: float,
    residual: float = 0.0,
) -> LocalPolicy:
    """
    Baseline running every cycle at f = N/T.

    Feasible iff every prefix of the schedule respects energy harvesting.
    With equal frequencies the full schedule is the binding prefix, so for
    R = 0 this is the same P_b h >= a test static_policy applies.
    """
    n = probs.n
    t = cfg.deadline
    freqs = np.full(n, n / t)
    harvested = cfg.upsilon * cfg.bs_power * h * t
    worst_case = cfg.gamma * n ** 3 / (t * t)
    if worst_case > (harvested + residual) * (1.0 + BOUNDARY_SLACK) or not prefix_feasible(freqs, cfg, h, residual):
        return _infeasible()
    energy = cfg.gamma * n * n / (t * t) * float(np.sum(probs.probs))
    tight = worst_case >= (harvested + residual) * (1.0 - BOUNDARY_SLACK)
    return LocalPolicy(
        feasible=True,
        regime=Regime.HARVEST_LIMITED if tight else Regime.HARVEST_UNCONSTRAINED,
        frequencies=freqs,
        lam=math.inf if tight else 0.0,
        lambda_infinite=tight,
        avg_energy=energy,
        savings=harvested - energy,
    )


# ---------------------------------------------------------------------------
# Checks and objective evaluation
# ---------------------------------------------------------------------------

def prefix_feasible(
    frequencies: np.ndarray,
    cfg: LocalConfig,
    h: float,
    residual: float = 0.0,
    slack: float = 1e-9,
) -> bool:
    """Every prefix m: sum_{k<=m} gamma f_k^2 <= (R + v P_b h sum_{k<=m} 1/f_k)(1 + slack)."""
    consumed = cfg.gamma * np.cumsum(frequencies * frequencies)
    harvested = residual + cfg.upsilon * cfg.bs_power * h * np.cumsum(1.0 / frequencies)
    return bool(np.all(consumed <= harvested * (1.0 + slack)))


def average_energy(probs: ExecutionProbabilities, frequencies: np.ndarray, gamma: float) -> float:
    """sum gamma p_k f_k^2."""
    return gamma * float(np.sum(probs.probs * frequencies * frequencies))


def realized_energy(frequencies: np.ndarray, cycles: int, gamma: float) -> float:
    """Energy of the first `cycles` cycles of a schedule."""
    head = frequencies[: max(0, int(cycles))]
    return gamma * float(np.sum(head * head))


# ---------------------------------------------------------------------------
# Tabulated energy curve
# ---------------------------------------------------------------------------

class LocalEnergyCurve:
    """
    Minimum average energy as a function of the energy budget, tabulated once
    per probability sequence.

    Both sides of the lambda equation are T- and P_b-free in lambda, so one
    table serves every deadline, BS power and gain of a sweep.
    """

    def __init__(self, probs: ExecutionProbabilities, points: int = 241):
        p = probs.positive()
        self.n = probs.n
        lams = np.concatenate(([0.0], np.logspace(-9.0, 7.0, points)))
        ratio = np.empty(lams.size + 1)
        energy = np.empty(lams.size + 1)
        for i, lam in enumerate(lams):
            s_cbrt, s_inv, s_pw = _power_sums(p, float(lam))
            ratio[i] = s_cbrt * s_cbrt * s_inv
            energy[i] = s_cbrt * s_cbrt * s_pw
        ratio[-1] = float(self.n) ** 3
        energy[-1] = float(self.n) ** 2 * float(np.sum(probs.probs))
        # ascending in ratio for np.interp; enforce monotonicity against rounding
        self._ratio = np.maximum.accumulate(ratio[::-1])
        self._energy = energy[::-1]
        logger.debug("LocalEnergyCurve over N=%d with %d points", self.n, ratio.size)

    @property
    def ratio_max(self) -> float:
        return float(self._ratio[-1])

    def evaluate(self, cfg: LocalConfig, h: float, residual: float = 0.0) -> tuple[Regime, float]:
        """
        (regime, minimum average energy) for one (cfg, h, R).

        Energy is nan for the infeasible regime.
        """
        target = energy_budget(cfg, h, residual)
        n3 = float(self.n) ** 3
        t2 = cfg.deadline * cfg.deadline
        if target < n3 * (1.0 - BOUNDARY_SLACK):
            return Regime.INFEASIBLE, math.nan
        if target >= self.ratio_max:
            return Regime.HARVEST_UNCONSTRAINED, cfg.gamma / t2 * float(self._energy[-1])
        return Regime.HARVEST_LIMITED, cfg.gamma / t2 * float(np.interp(target, self._ratio, self._energy))

"""
Mode Selection
==============

Pick local computing or offloading for one task. A mode that is feasible
alone wins; when both are feasible, offload iff

    delta_savings = S_off - S_loc >= 0

The threshold helpers (deadline_threshold, power_threshold) reproduce the
closed-form trend analysis and are diagnostics only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Union

from wpmcc.local import LocalConfig, LocalPolicy
from wpmcc.offloading import LN2, OffloadConfig, OffloadPolicy

if TYPE_CHECKING:
    from wpmcc.allocation import AllocationPlan

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    LOCAL = "local"
    OFFLOAD = "offload"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class ModeDecision:
    """Chosen mode plus both candidate results; delta_savings is NaN unless both were feasible."""

    mode: Mode
    delta_savings: float
    local: Union[LocalPolicy, "AllocationPlan"]
    offload: Union[OffloadPolicy, "AllocationPlan"]

    @property
    def savings(self) -> float:
        """Savings of the chosen mode, NaN when neither is feasible."""
        if self.mode is Mode.LOCAL:
            return self.local.savings
        if self.mode is Mode.OFFLOAD:
            return self.offload.savings
        return math.nan


def _decide(local_ok: bool, local_savings: float, offload_ok: bool, offload_savings: float) -> tuple[Mode, float]:
    if local_ok and offload_ok:
        delta = offload_savings - local_savings
        return (Mode.OFFLOAD if delta >= 0 else Mode.LOCAL), delta
    if offload_ok:
        return Mode.OFFLOAD, math.nan
    if local_ok:
        return Mode.LOCAL, math.nan
    return Mode.INFEASIBLE, math.nan


def select(local: LocalPolicy, offload: OffloadPolicy) -> ModeDecision:
    """
    Choose the operation mode for a static channel.

    Args:
        local:   Local-computing policy for (h, L, T, P_b).
        offload: Offloading policy for the same inputs.

    Returns:
        ModeDecision; delta_savings is nan unless both modes are feasible.
        Ties go to offloading.
    """
    mode, delta = _decide(local.feasible, local.savings, offload.feasible, offload.savings)
    return ModeDecision(mode=mode, delta_savings=delta, local=local, offload=offload)


def select_dynamic(local_plan: "AllocationPlan", offload_plan: "AllocationPlan") -> ModeDecision:
    """Same rule over multi-block plans, comparing their total savings."""
    mode, delta = _decide(
        local_plan.feasible, local_plan.total_savings,
        offload_plan.feasible, offload_plan.total_savings,
    )
    return ModeDecision(mode=mode, delta_savings=delta, local=local_plan, offload=offload_plan)


# ---------------------------------------------------------------------------
# Threshold diagnostics
# ---------------------------------------------------------------------------

def theta_of(local: LocalPolicy, cfg: LocalConfig) -> float:
    """theta with E_loc = gamma theta / T^2; nan for infeasible policies."""
    if not local.feasible:
        return math.nan
    return local.avg_energy * cfg.deadline ** 2 / cfg.gamma


def deadline_threshold(theta: float, y: float, bits: float, gamma: float) -> float:
    """Deadline sqrt(gamma theta / (y L)) below which offloading is preferred."""
    return math.sqrt(gamma * theta / (y * bits))


def power_threshold(cfg: OffloadConfig, h: float, theta: float, bits: float, gamma: float) -> float:
    """
    BS power below which offloading is preferred.

        a''' = B h gamma theta / (e T^2 sigma^2 L ln 2)
        P_b  = sigma^2 / (v h^2) (1 + e a''' ln a''')
    """
    a3 = cfg.bandwidth * h * gamma * theta / (math.e * cfg.deadline ** 2 * cfg.noise_var * bits * LN2)
    return cfg.noise_var / (cfg.upsilon * h * h) * (1.0 + math.e * a3 * math.log(a3))

"""
Offloading Policies
===================

Time division between microwave power transfer (MPT) and fixed-rate
offloading of L bits within the deadline. MPT occupies T - t, offloading t:

    S(t) = v P_b h (T - t) - (2^(L/(B t)) - 1) (sigma^2 / h) t

S is concave in t; its unconstrained maximizer is t* = rho(h) L with

    rho(h) = ln 2 / (B [1 + W(v P_b h^2 / (sigma^2 e) - 1/e)])
    y(h)   = (sigma^2 ln 2 / (B h)) exp(W(.) + 1)       (J per bit)

and S(t*) = v P_b h T - y(h) L. Offloading is feasible iff P_b h^2 >= a''.

The slave variant (one fading block with residual energy R) may draw on R
and, for large R, use the whole block for transmission.

Usage:
    from wpmcc.offloading import OffloadConfig, static_policy

    cfg = OffloadConfig(bandwidth=1e6, noise_var=1e-9, upsilon=0.8, bs_power=0.5, deadline=0.035)
    policy = static_policy(cfg, h=1e-5, bits=1000)
    policy.duration, policy.savings
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from wpmcc.numerics import lambert_w0

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
# math.exp overflows just above this
EXP_LIMIT = 709.0
BOUNDARY_SLACK = 1e-12


class OffloadRegime(str, Enum):
    INFEASIBLE = "infeasible"
    INTERIOR = "interior"
    FULL_BLOCK = "full-block"


class OffloadConfig(BaseModel):
    """Constants of the offloading problem."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    bandwidth: float = Field(default=1e6, gt=0)
    noise_var: float = Field(default=1e-9, gt=0)
    upsilon: float = Field(default=0.8, gt=0, le=1)
    bs_power: float = Field(default=0.5, gt=0)
    deadline: float = Field(default=0.035, gt=0)

    def with_deadline(self, deadline: float) -> "OffloadConfig":
        return self.model_copy(update={"deadline": deadline})

    def harvested(self, h: float) -> float:
        """Energy harvested over the whole deadline, v P_b h T."""
        return self.upsilon * self.bs_power * h * self.deadline


@dataclass(frozen=True)
class OffloadPolicy:
    """Outcome of an MPT/offloading time-division optimization."""

    feasible: bool
    regime: OffloadRegime
    duration: float = 0.0
    savings: float = math.nan


_INFEASIBLE = OffloadPolicy(feasible=False, regime=OffloadRegime.INFEASIBLE, duration=math.nan)


def _exp(x: float) -> float:
    return math.inf if x > EXP_LIMIT else math.exp(x)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def offload_energy(cfg: OffloadConfig, h: float, bits: float, duration: float) -> float:
    """
    Transmission energy (2^(l/(B t)) - 1) (sigma^2/h) t at a fixed rate.

    Raises:
        ValueError: If duration <= 0 while bits > 0.
    """
    if bits == 0:
        return 0.0
    if not duration > 0:
        raise ValueError(f"duration must be positive to send {bits} bits, got {duration}")
    exponent = bits * LN2 / (cfg.bandwidth * duration)
    if exponent > EXP_LIMIT:
        return math.inf
    return math.expm1(exponent) * cfg.noise_var * duration / h


def savings_objective(cfg: OffloadConfig, h: float, bits: float, duration: float) -> float:
    """S(t) = v P_b h (T - t) - E_off(t)."""
    return cfg.upsilon * cfg.bs_power * h * (cfg.deadline - duration) - offload_energy(cfg, h, bits, duration)


def _w_of_h(cfg: OffloadConfig, h: float) -> float:
    x = cfg.upsilon * cfg.bs_power * h * h / (cfg.noise_var * math.e) - 1.0 / math.e
    return lambert_w0(x)


def rho(cfg: OffloadConfig, h: float) -> float:
    """Optimal offloading time per bit, ln 2 / (B [1 + W(.)]); inf when the gain is too weak to offload."""
    wp1 = 1.0 + _w_of_h(cfg, h)
    if wp1 <= 0.0:
        return math.inf
    return LN2 / (cfg.bandwidth * wp1)


def y_of_h(cfg: OffloadConfig, h: float) -> float:
    """Energy cost per offloaded bit net of the MPT time it displaces."""
    return cfg.noise_var * LN2 / (cfg.bandwidth * h) * math.exp(_w_of_h(cfg, h) + 1.0)


def threshold_a2(cfg: OffloadConfig, bits: float) -> float:
    """
    Feasibility threshold a'' on P_b h^2 for offloading `bits` within the deadline.

        d   = L ln 2 / (B T)
        a'' = sigma^2/v {1 + [d + W(-e^(-1-d))] exp(d + W(-e^(-1-d)) + 1)}
    """
    if not bits > 0:
        raise ValueError(f"bits must be positive, got {bits}")
    d = bits * LN2 / (cfg.bandwidth * cfg.deadline)
    w = lambert_w0(-_exp(-1.0 - d))
    return cfg.noise_var / cfg.upsilon * (1.0 + (d + w) * _exp(d + w + 1.0))


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

def static_policy(cfg: OffloadConfig, h: float, bits: float) -> OffloadPolicy:
    """
    Optimal offloading duration for a static channel.

    Args:
        cfg:  Offloading constants (deadline = T).
        h:    Channel power gain.
        bits: Input size L (>= 0).

    Returns:
        OffloadPolicy: infeasible iff P_b h^2 < a''; otherwise duration
        rho(h) L and savings v P_b h T - y(h) L (>= 0).
    """
    harvested = cfg.harvested(h)
    if bits == 0:
        return OffloadPolicy(feasible=True, regime=OffloadRegime.INTERIOR, duration=0.0, savings=harvested)
    if cfg.bs_power * h * h < threshold_a2(cfg, bits) * (1.0 - BOUNDARY_SLACK):
        return _INFEASIBLE
    duration = min(rho(cfg, h) * bits, cfg.deadline)
    savings = max(harvested - y_of_h(cfg, h) * bits, 0.0)
    return OffloadPolicy(feasible=True, regime=OffloadRegime.INTERIOR, duration=duration, savings=savings)


def _slave_constants(cfg: OffloadConfig, h: float) -> tuple[float, float, float, float]:
    """(y, rho, residual threshold, c) for one block."""
    w = _w_of_h(cfg, h)
    t_c = cfg.deadline
    y = cfg.noise_var * LN2 / (cfg.bandwidth * h) * math.exp(w + 1.0)
    if 1.0 + w <= 0.0:
        # W at the branch point: no finite interior duration exists
        return y, math.inf, 0.0, 0.0
    r = LN2 / (cfg.bandwidth * (1.0 + w))
    # B T_c y / ln 2 - sigma^2 T_c / h
    r_thr = t_c * cfg.noise_var / h * math.expm1(w + 1.0)
    c = t_c * cfg.bandwidth * (1.0 + w) / LN2
    return y, r, r_thr, c


def slave_policy(cfg: OffloadConfig, h: float, bits: float, residual: float = 0.0) -> OffloadPolicy:
    """
    Optimal offloading for one fading block with residual energy R.

    Args:
        cfg:      Offloading constants with deadline = T_c.
        h:        Block channel power gain.
        bits:     Block input size l (>= 0).
        residual: Residual energy R (>= 0) carried into the block.

    Returns:
        OffloadPolicy with savings G_off(l, R, h):
            interior   t = rho(h) l, G = v P_b h T_c - y(h) l
            full-block t = T_c,      G = -(2^(l/(B T_c)) - 1) sigma^2 T_c / h
        With R = 0 this is static_policy.
    """
    if residual < 0:
        raise ValueError(f"residual must be non-negative, got {residual}")
    if residual == 0 or bits == 0:
        return static_policy(cfg, h, bits)

    t_c = cfg.deadline
    harvested = cfg.harvested(h)
    y, r, r_thr, c = _slave_constants(cfg, h)

    if residual <= r_thr:
        if math.isfinite(r) and bits <= (harvested + residual) / y:
            return OffloadPolicy(True, OffloadRegime.INTERIOR, duration=r * bits, savings=harvested - y * bits)
        return _INFEASIBLE

    if bits < c:
        return OffloadPolicy(True, OffloadRegime.INTERIOR, duration=r * bits, savings=harvested - y * bits)
    c_prime = cfg.bandwidth * t_c * math.log2(1.0 + residual * h / (cfg.noise_var * t_c))
    if bits <= c_prime:
        return OffloadPolicy(
            True, OffloadRegime.FULL_BLOCK, duration=t_c, savings=-offload_energy(cfg, h, bits, t_c)
        )
    return _INFEASIBLE


def equal_time_policy(cfg: OffloadConfig, h: float, bits: float) -> OffloadPolicy:
    """Baseline splitting the deadline evenly: T/2 for MPT, T/2 for offloading."""
    half = cfg.deadline / 2.0
    savings = savings_objective(cfg, h, bits, half)
    if savings < 0:
        return _INFEASIBLE
    return OffloadPolicy(feasible=True, regime=OffloadRegime.INTERIOR, duration=half, savings=savings)


def block_savings_table(
    cfg: OffloadConfig,
    h: float,
    bits_grid: np.ndarray,
    residual_grid: np.ndarray,
) -> np.ndarray:
    """
    G_off(l, R, h) over a grid, vectorised slave_policy.

    Args:
        cfg:           Offloading constants with deadline = T_c.
        h:             Block channel power gain.
        bits_grid:     Candidate block input sizes, shape (J,).
        residual_grid: Residual energies, shape (I,).

    Returns:
        Array of shape (I, J); -inf marks infeasible (R, l) pairs.
    """
    bits = np.asarray(bits_grid, dtype=float)[None, :]
    res = np.asarray(residual_grid, dtype=float)[:, None]
    t_c = cfg.deadline
    harvested = cfg.harvested(h)
    y, r, r_thr, c = _slave_constants(cfg, h)

    interior = harvested - y * bits
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        full = -np.expm1(bits * LN2 / (cfg.bandwidth * t_c)) * cfg.noise_var * t_c / h
        c_prime = cfg.bandwidth * t_c * np.log2(1.0 + res * h / (cfg.noise_var * t_c))

    low_r = res <= r_thr
    case_a = low_r & (bits <= (harvested + res) / y)
    if not math.isfinite(r):
        case_a = case_a & (bits == 0)
    case_b = ~low_r & (bits < c)
    case_full = ~low_r & (bits >= c) & (bits <= c_prime)

    table = np.full(np.broadcast_shapes(res.shape, bits.shape), -np.inf)
    table = np.where(case_a | case_b, interior, table)
    table = np.where(case_full, full, table)
    # R = 0 blocks follow the static rule, whose savings never go negative
    zero_r = (res == 0) & np.isfinite(table)
    return np.where(zero_r, np.maximum(table, 0.0), table)

"""
CPU-Cycle Information (CCI) Model
=================================

The number of CPU cycles needed per input bit is a random variable X. This
module turns its distribution into the quantities every local-computing
policy is built from:

    - compute_n0:              cycles-per-bit cap N0 with Pr(X > N0) <= epsilon
    - execution_probabilities: p_k = Pr(LX >= k), k = 1..N, N = ceil(L * N0)
    - scaling_factors:         theta0, theta1, phi0, phi1 (the l^3 factors of
                               the data thresholds and energy functions)

Supported distributions:
    - gamma          (shape alpha, scale beta in cycles/bit; mean alpha*beta)
    - deterministic  (X == value, for tests and sanity checks)

Usage:
    from wpmcc.cci import CciModel, compute_n0, execution_probabilities

    model = CciModel(shape=4, scale=200, epsilon=0.05)
    n0 = compute_n0(model)
    probs = execution_probabilities(model, 1000)
    probs.n          # ~1.55 million cycles
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from wpmcc.settings import get_settings

logger = logging.getLogger(__name__)

# Floor applied before negative powers of p_k
PROB_FLOOR = 1e-12


class ResourceLimitError(RuntimeError):
    """The requested cycle count exceeds the configured cap."""


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class CciModel(BaseModel):
    """Distribution of CPU cycles per input bit."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["gamma", "deterministic"] = "gamma"
    shape: float = Field(default=4.0, gt=0)
    scale: float = Field(default=200.0, gt=0)
    epsilon: float = Field(default=0.05, gt=0, le=0.5)
    value: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_kind(self) -> "CciModel":
        if self.kind == "deterministic" and self.value is None:
            raise ValueError("deterministic CCI needs 'value' (cycles per bit)")
        return self

    @classmethod
    def deterministic(cls, value: float, epsilon: float = 0.05) -> "CciModel":
        return cls(kind="deterministic", value=value, epsilon=epsilon)

    @property
    def mean(self) -> float:
        if self.kind == "deterministic":
            return float(self.value)
        return self.shape * self.scale

    def survival(self, x):
        """Pr(X > x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "deterministic":
            return (x < self.value).astype(float)
        return stats.gamma.sf(x, a=self.shape, scale=self.scale)

    def execution_survival(self, x):
        """Pr(X >= x); equals survival() for continuous X."""
        x = np.asarray(x, dtype=float)
        if self.kind == "deterministic":
            return (x <= self.value).astype(float)
        return stats.gamma.sf(x, a=self.shape, scale=self.scale)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw CCI realizations (cycles per bit)."""
        if self.kind == "deterministic":
            return np.full(size, float(self.value)) if size is not None else float(self.value)
        return rng.gamma(self.shape, self.scale, size=size)


# ---------------------------------------------------------------------------
# Derived sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExecutionProbabilities:
    """p_1 >= p_2 >= ... >= p_N for one input size."""

    data_bits: float
    n0: int
    probs: np.ndarray

    @property
    def n(self) -> int:
        return int(self.probs.size)

    def positive(self) -> np.ndarray:
        """probs floored away from zero, safe for negative powers."""
        return np.maximum(self.probs, PROB_FLOOR)


@dataclass(frozen=True)
class ScalingFactors:
    """l^3 scaling factors of the data thresholds and energy functions."""

    theta0: float
    theta1: float
    phi0: float
    phi1: float

    @property
    def phi_bar(self) -> float:
        """1 - phi1/theta1, the residual-energy contraction factor."""
        return 1.0 - self.phi1 / self.theta1


@lru_cache(maxsize=64)
def compute_n0(model: CciModel) -> int:
    """
    Smallest positive integer N0 with Pr(X > N0) <= epsilon.

    Args:
        model: The CCI distribution.

    Returns:
        N0 such that S(N0) <= epsilon < S(N0 - 1).
    """
    if model.kind == "deterministic":
        return max(1, math.ceil(model.value))

    n = max(1, math.ceil(float(stats.gamma.isf(model.epsilon, a=model.shape, scale=model.scale))))
    # isf is accurate to a few ulps; settle the integer boundary on sf itself
    while float(model.survival(n)) > model.epsilon:
        n += 1
    while n > 1 and float(model.survival(n - 1)) <= model.epsilon:
        n -= 1
    logger.debug("N0=%d for %s (S(N0)=%.4g)", n, model, float(model.survival(n)))
    return n


def cycle_count(model: CciModel, data_bits: float) -> int:
    """N = ceil(L * N0), robust to float noise in L."""
    return int(math.ceil(round(data_bits * compute_n0(model), 9)))


def execution_probabilities(
    model: CciModel,
    data_bits: float,
    max_cycles: int | None = None,
) -> ExecutionProbabilities:
    """
    Execution probabilities p_k = Pr(LX >= k) = S(k/L) for k = 1..N.

    Args:
        model:      CCI distribution.
        data_bits:  Input size L in bits (> 0).
        max_cycles: Cap on N; defaults to the WPMCC_MAX_CYCLES setting.

    Returns:
        ExecutionProbabilities with a monotone non-increasing probs array.

    Raises:
        ValueError:         If data_bits <= 0.
        ResourceLimitError: If N exceeds the cap.
    """
    if not data_bits > 0:
        raise ValueError(f"data_bits must be positive, got {data_bits}")
    cap = max_cycles if max_cycles is not None else get_settings()["max_cycles"]

    n0 = compute_n0(model)
    n = cycle_count(model, data_bits)
    if n > cap:
        raise ResourceLimitError(f"{n:,} cycles for L={data_bits} exceeds the cap of {cap:,}")

    k = np.arange(1, n + 1, dtype=float)
    probs = np.minimum.accumulate(model.execution_survival(k / data_bits))
    return ExecutionProbabilities(data_bits=float(data_bits), n0=n0, probs=probs)


def scaling_factors(model: CciModel, ref_bits: float) -> ScalingFactors:
    """
    Scaling factors evaluated from the exact cycle sums at ref_bits.

        theta0 = (sum p^1/3)^2 (sum p^-2/3) / l^3
        theta1 = N^3 / l^3
        phi0   = (sum p^1/3)^3 / l^3
        phi1   = N^2 (sum p) / l^3

    Args:
        model:    CCI distribution.
        ref_bits: Reference input size l (> 0).
    """
    probs = execution_probabilities(model, ref_bits)
    p = probs.positive()
    n = float(probs.n)
    l3 = float(ref_bits) ** 3

    s_cbrt = float(np.sum(np.cbrt(p)))
    s_inv = float(np.sum(p ** (-2.0 / 3.0)))
    s_p = float(np.sum(probs.probs))

    return ScalingFactors(
        theta0=s_cbrt ** 2 * s_inv / l3,
        theta1=n ** 3 / l3,
        phi0=s_cbrt ** 3 / l3,
        phi1=n ** 2 * s_p / l3,
    )

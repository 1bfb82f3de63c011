"""
Channel Model
=============

Effective scalar channel power gains h = ||h||^2 under Rician fading with
transmit/receive beamforming at an N_t-antenna BS:

    h_vec = sqrt(Omega K / (1 + K)) * 1 + sqrt(Omega / (1 + K)) * w,   w ~ CN(0, I)

One gain serves both the power-transfer and the offloading direction
(channel reciprocity). Dynamic channels are i.i.d. block fading.

Randomness comes from per-stream Philox generators keyed by (seed, ids...),
so trial t always sees the same draws regardless of scheduling.

Usage:
    from wpmcc.channel import RicianParams, rng_stream, sample_gain

    params = RicianParams(n_antennas=2, rician_k=0, avg_power=5e-6, seed=7)
    rng = rng_stream(params.seed, 0)
    h = sample_gain(params, rng)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1


class RicianParams(BaseModel):
    """Rician vector-fading parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_antennas: int = Field(default=2, ge=1)
    rician_k: float = Field(default=0.0, ge=0)
    avg_power: float = Field(default=5e-6, gt=0)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)

    @property
    def mean_gain(self) -> float:
        """E[h] = Omega * N_t for any K."""
        return self.avg_power * self.n_antennas


@dataclass(frozen=True)
class BlockGains:
    """Per-block gains h_1..h_M of an i.i.d. block-fading channel."""

    gains: np.ndarray
    block_duration: float

    @property
    def m(self) -> int:
        return int(self.gains.size)

    @property
    def deadline(self) -> float:
        return self.m * self.block_duration


def rng_stream(seed: int, *stream_ids: int) -> np.random.Generator:
    """Independent generator for the stream (seed, *stream_ids)."""
    seq = np.random.SeedSequence([int(seed), *(int(i) for i in stream_ids)])
    return np.random.Generator(np.random.Philox(seq))


def sample_gain(params: RicianParams, rng: np.random.Generator) -> float:
    """
    Draw one effective channel power gain.

    Args:
        params: Rician parameters.
        rng:    Generator owned by the caller's stream.

    Returns:
        h = squared Euclidean norm of the N_t-element channel vector.
    """
    k = params.rician_k
    los = math.sqrt(params.avg_power * k / (1.0 + k))
    nlos = math.sqrt(params.avg_power / (1.0 + k))

    re = rng.standard_normal(params.n_antennas)
    im = rng.standard_normal(params.n_antennas)
    # CN(0, 1): each real component has variance 1/2
    h_re = los + nlos * re / math.sqrt(2.0)
    h_im = nlos * im / math.sqrt(2.0)
    return float(np.sum(h_re * h_re + h_im * h_im))


def sample_block_gains(
    params: RicianParams,
    m: int,
    t_c: float,
    rng: np.random.Generator,
) -> BlockGains:
    """
    Draw M i.i.d. block gains.

    Args:
        params: Rician parameters.
        m:      Number of fading blocks (>= 1).
        t_c:    Block duration in seconds (> 0).
        rng:    Generator owned by the caller's stream.

    Raises:
        ValueError: If m < 1 or t_c <= 0.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not t_c > 0:
        raise ValueError(f"t_c must be positive, got {t_c}")
    gains = np.array([sample_gain(params, rng) for _ in range(m)])
    return BlockGains(gains=gains, block_duration=float(t_c))

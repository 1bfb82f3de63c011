"""
WPMCC Policy Engine
===================

Energy-optimal policies for a mobile that harvests microwave power from a
base station (BS) and must either compute a task locally or offload its
input data to the cloud before a deadline, plus a Monte-Carlo harness
estimating the probability of computing the task in time.

Available modules:
    - settings:    Settings discovery, logging setup, policy catalog
    - numerics:    Lambert W and monotone root finding
    - cci:         CPU-cycle distribution, execution probabilities, scaling factors
    - channel:     Rician block-fading gains and per-trial random streams
    - local:       Optimal CPU-cycle frequencies (static and per-block)
    - offloading:  Optimal MPT/offloading time division (static and per-block)
    - mode:        Local computing vs offloading selection
    - allocation:  Data allocation over fading blocks (sub-optimal, greedy, DP, equal)
    - simulation:  Monte-Carlo sweeps and CSV output
    - cli:         python -m wpmcc

Quick Start:
    from wpmcc.cci import CciModel, execution_probabilities
    from wpmcc.local import LocalConfig, static_policy
    probs = execution_probabilities(CciModel(), 1000)
    policy = static_policy(probs, LocalConfig(), h=1e-5)

    from wpmcc.offloading import OffloadConfig, static_policy
    policy = static_policy(OffloadConfig(), h=1e-5, bits=1000)

CLI:
    python -m wpmcc static-local --h 1e-5
    python -m wpmcc sweep --config configs/deadline_k0.json --out results/deadline_k0.csv
    python -m wpmcc policies
"""

from wpmcc.settings import configure_logging, get_settings, resolve_policy

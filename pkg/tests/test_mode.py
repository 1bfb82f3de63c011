import math

import numpy as np
import pytest

from wpmcc.allocation import AllocationPlan
from wpmcc.cci import execution_probabilities
from wpmcc.local import LocalPolicy, Regime, static_policy as local_static
from wpmcc.mode import Mode, deadline_threshold, power_threshold, select, select_dynamic, theta_of
from wpmcc.offloading import OffloadPolicy, OffloadRegime, static_policy as offload_static, y_of_h


def local(feasible=True, savings=1.0):
    return LocalPolicy(
        feasible=feasible,
        regime=Regime.HARVEST_LIMITED if feasible else Regime.INFEASIBLE,
        frequencies=np.ones(3),
        avg_energy=0.5,
        savings=savings if feasible else math.nan,
    )


def offload(feasible=True, savings=1.0):
    return OffloadPolicy(
        feasible=feasible,
        regime=OffloadRegime.INTERIOR if feasible else OffloadRegime.INFEASIBLE,
        duration=0.01,
        savings=savings if feasible else math.nan,
    )


def plan(feasible=True, savings=1.0):
    return AllocationPlan(
        mode="any", feasible=feasible, allocations=np.ones(2), residual_estimates=np.zeros(2),
        total_objective=savings, total_savings=savings if feasible else math.nan,
    )


@pytest.mark.parametrize("loc, off, expected", [
    (local(True), offload(False), Mode.LOCAL),
    (local(False), offload(True), Mode.OFFLOAD),
    (local(False), offload(False), Mode.INFEASIBLE),
    (local(True, 2.0), offload(True, 1.0), Mode.LOCAL),
    (local(True, 1.0), offload(True, 2.0), Mode.OFFLOAD),
])
def test_select(loc, off, expected):
    decision = select(loc, off)
    assert decision.mode is expected
    if loc.feasible and off.feasible:
        assert decision.delta_savings == pytest.approx(off.savings - loc.savings)
    else:
        assert math.isnan(decision.delta_savings)


def test_ties_go_to_offloading():
    decision = select(local(True, 1.5), offload(True, 1.5))
    assert decision.mode is Mode.OFFLOAD
    assert decision.delta_savings == 0.0


def test_decision_savings():
    assert select(local(True, 3.0), offload(True, 1.0)).savings == 3.0
    assert select(local(False), offload(True, 1.0)).savings == 1.0
    assert math.isnan(select(local(False), offload(False)).savings)


def test_decision_invariant_to_energy_scaling():
    for scale in (1e-9, 1.0, 1e6):
        assert select(local(True, 2.0 * scale), offload(True, 1.0 * scale)).mode is Mode.LOCAL


def test_select_dynamic():
    assert select_dynamic(plan(True, 1.0), plan(True, 2.0)).mode is Mode.OFFLOAD
    assert select_dynamic(plan(True, 1.0), plan(False)).mode is Mode.LOCAL
    assert select_dynamic(plan(False), plan(False)).mode is Mode.INFEASIBLE


def test_real_policies(small_model, local_cfg, offload_cfg):
    probs = execution_probabilities(small_model, 20)
    h = 1e-5
    decision = select(local_static(probs, local_cfg, h), offload_static(offload_cfg, h, 20))
    assert decision.mode in (Mode.LOCAL, Mode.OFFLOAD)
    assert decision.delta_savings == pytest.approx(decision.offload.savings - decision.local.savings)


def test_threshold_diagnostics(small_model, local_cfg, offload_cfg):
    probs = execution_probabilities(small_model, 20)
    policy = local_static(probs, local_cfg, 1e-5)
    theta = theta_of(policy, local_cfg)
    assert policy.avg_energy == pytest.approx(local_cfg.gamma * theta / local_cfg.deadline ** 2)
    assert math.isnan(theta_of(local(False), local_cfg))

    y = y_of_h(offload_cfg, 1e-5)
    t_thr = deadline_threshold(theta, y, 20, local_cfg.gamma)
    # at T = sqrt(gamma theta / (y L)) the local energy equals y L
    assert local_cfg.gamma * theta / t_thr ** 2 == pytest.approx(y * 20)

    p_thr = power_threshold(offload_cfg, 1e-5, theta, 20, local_cfg.gamma)
    assert math.isfinite(p_thr)

import numpy as np
import pytest
from pydantic import ValidationError

from wpmcc.cci import (
    CciModel,
    ResourceLimitError,
    ScalingFactors,
    compute_n0,
    cycle_count,
    execution_probabilities,
    scaling_factors,
)


def test_n0_gamma_reference(ref_model):
    n0 = compute_n0(ref_model)
    assert n0 == 1551
    assert ref_model.survival(n0) <= 0.05 < ref_model.survival(n0 - 1)


def test_n0_small_model(small_model):
    assert compute_n0(small_model) == 5


def test_n0_deterministic():
    assert compute_n0(CciModel.deterministic(2.0)) == 2
    assert compute_n0(CciModel.deterministic(2.5)) == 3


def test_deterministic_probabilities_are_one():
    probs = execution_probabilities(CciModel.deterministic(2.0), 3)
    assert probs.n == 6
    np.testing.assert_array_equal(probs.probs, np.ones(6))


def test_probabilities_monotone_and_bounded(ref_model):
    probs = execution_probabilities(ref_model, 0.5)
    assert probs.n == cycle_count(ref_model, 0.5) == 776
    assert np.all(np.diff(probs.probs) <= 0)
    assert probs.probs[0] <= 1.0
    # the last cycle sits at or past N0, the one before it short of N0
    assert probs.probs[-1] == pytest.approx(float(ref_model.survival(probs.n / 0.5)), rel=1e-12)
    assert probs.probs[-1] <= 0.05
    assert probs.probs[-2] == pytest.approx(float(ref_model.survival(1550)), rel=1e-12)
    assert probs.probs[-2] > 0.05


def test_probabilities_scale_with_data_size(small_model):
    short = execution_probabilities(small_model, 4)
    long = execution_probabilities(small_model, 8)
    np.testing.assert_allclose(long.probs[1::2], short.probs, rtol=1e-12)


def test_probabilities_match_empirical_frequencies():
    model = CciModel(shape=4, scale=200)
    bits = 0.01
    probs = execution_probabilities(model, bits)
    samples = bits * model.sample(np.random.default_rng(3), size=100_000)
    k = np.arange(1, probs.n + 1)
    empirical = (samples[:, None] >= k[None, :]).mean(axis=0)
    np.testing.assert_allclose(empirical, probs.probs, atol=0.01)


def test_positive_floor():
    probs = execution_probabilities(CciModel(shape=1, scale=0.01, epsilon=1e-12), 1)
    assert np.all(probs.positive() > 0)


def test_invalid_inputs(small_model):
    with pytest.raises(ValueError):
        execution_probabilities(small_model, 0)
    with pytest.raises(ValidationError):
        CciModel(epsilon=0.7)
    with pytest.raises(ValidationError):
        CciModel(kind="deterministic")
    with pytest.raises(ValidationError):
        CciModel(colour="red")


def test_resource_limit(ref_model):
    with pytest.raises(ResourceLimitError):
        execution_probabilities(ref_model, 1000, max_cycles=10_000)


def test_resource_limit_from_settings(ref_model, monkeypatch):
    from wpmcc.settings import reset_settings_cache

    monkeypatch.setenv("WPMCC_MAX_CYCLES", "100")
    reset_settings_cache()
    with pytest.raises(ResourceLimitError):
        execution_probabilities(ref_model, 1)


def test_scaling_factors_deterministic():
    factors = scaling_factors(CciModel.deterministic(5.0), 4)
    for value in (factors.theta0, factors.theta1, factors.phi0, factors.phi1):
        assert value == pytest.approx(125.0, rel=1e-12)
    assert factors.phi_bar == pytest.approx(0.0, abs=1e-12)


def test_scaling_factors_ordering(ref_model):
    factors = scaling_factors(ref_model, 5)
    assert factors.theta0 > factors.theta1
    assert factors.phi0 < factors.phi1 <= factors.theta1
    assert 0 < factors.phi_bar < 1


def test_scaling_factors_stable_in_reference_size(ref_model):
    a = scaling_factors(ref_model, 5)
    b = scaling_factors(ref_model, 10)
    for name in ("theta0", "theta1", "phi0", "phi1"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=0.01)


def test_phi_bar():
    assert ScalingFactors(theta0=2, theta1=1, phi0=0.5, phi1=1).phi_bar == 0.0
    assert ScalingFactors(theta0=2, theta1=4, phi0=0.5, phi1=1).phi_bar == 0.75

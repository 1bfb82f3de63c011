"""Shared fixtures: system constants and small CCI models."""

import sys
from pathlib import Path

import pytest

# Add project root to path so tests can import wpmcc and backend
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from wpmcc.cci import CciModel
from wpmcc.local import LocalConfig
from wpmcc.offloading import OffloadConfig
from wpmcc.settings import reset_settings_cache


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale runs (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch, tmp_path):
    """Each test sees default settings and its own results directory."""
    for var in ("WPMCC_SETTINGS", "WPMCC_LOG", "WPMCC_THREADS", "WPMCC_MAX_CYCLES"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("WPMCC_SETTINGS", str(tmp_path / "no-settings.json"))
    monkeypatch.setenv("WPMCC_RESULTS_DIR", str(tmp_path / "results"))
    reset_settings_cache()
    yield
    reset_settings_cache()


@pytest.fixture
def local_cfg():
    return LocalConfig(gamma=1e-28, upsilon=0.8, bs_power=0.5, deadline=0.035)


@pytest.fixture
def offload_cfg():
    return OffloadConfig(bandwidth=1e6, noise_var=1e-9, upsilon=0.8, bs_power=0.5, deadline=0.035)


@pytest.fixture
def ref_model():
    """Gamma(4, 200) cycles per bit, epsilon = 0.05 (N0 = 1551)."""
    return CciModel(shape=4, scale=200, epsilon=0.05)


@pytest.fixture
def small_model():
    """Gamma(4, 0.6) cycles per bit: N0 = 5, so L = 20 bits gives N = 100 cycles."""
    return CciModel(shape=4, scale=0.6, epsilon=0.05)


@pytest.fixture
def det_model():
    return CciModel.deterministic(5.0)

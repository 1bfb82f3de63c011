import json
import logging

import pytest

from wpmcc import settings
from wpmcc.settings import configure_logging, get_settings, reset_settings_cache, resolve_policy


def test_defaults():
    cfg = get_settings()
    assert cfg["log_level"] == "warning"
    assert cfg["threads"] == 0
    assert cfg["max_cycles"] == 10_000_000
    assert cfg["source"] == "env"


def test_settings_file_and_env_override(tmp_path, monkeypatch):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"threads": 3, "max_cycles": 5000, "colour": "blue"}))
    monkeypatch.setenv("WPMCC_SETTINGS", str(path))
    reset_settings_cache()

    cfg = get_settings()
    assert cfg["threads"] == 3
    assert cfg["max_cycles"] == 5000
    assert cfg["source"] == str(path)
    assert "colour" not in cfg

    monkeypatch.setenv("WPMCC_THREADS", "7")
    assert get_settings()["threads"] == 7


def test_configure_logging_levels(monkeypatch):
    assert configure_logging("debug") == logging.DEBUG
    assert configure_logging("warn") == logging.WARNING
    monkeypatch.setenv("WPMCC_LOG", "error")
    assert configure_logging() == logging.ERROR
    handlers = [h for h in logging.getLogger("wpmcc").handlers if getattr(h, "_wpmcc", False)]
    assert len(handlers) == 1


def test_configure_logging_rejects_unknown_level():
    with pytest.raises(ValueError, match="Invalid log level"):
        configure_logging("chatty")


def test_resolve_policy_aliases():
    assert resolve_policy("local-opt") == "local-opt"
    assert resolve_policy("mode-selection") == "mms"
    assert resolve_policy("dp") == "dyn-dp"
    with pytest.raises(ValueError, match="Unknown policy"):
        resolve_policy("teleport")


def test_catalog_lists_are_consistent():
    assert set(settings.STATIC_POLICIES) | set(settings.DYNAMIC_POLICIES) == set(settings.POLICIES)
    assert all(name in settings.POLICIES for name in settings.POLICY_ALIASES.values())

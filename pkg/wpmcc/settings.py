"""
Settings and Policy Catalog
===========================

Reads runtime settings from the first settings file found and provides
shared configuration for all wpmcc modules.

Settings files are searched in order:
    1. $WPMCC_SETTINGS (if set)
    2. ~/.config/wpmcc/settings.json
    3. <repo>/settings.json

Environment variables (override file values):
    WPMCC_LOG          - error | warn | info | debug
    WPMCC_THREADS      - worker threads for Monte Carlo (0 = auto)
    WPMCC_MAX_CYCLES   - cap on execution-probability entries
    WPMCC_RESULTS_DIR  - where the backend stores sweep CSVs

Usage:
    from wpmcc.settings import get_settings, configure_logging, resolve_policy

    configure_logging()              # honours WPMCC_LOG
    cfg = get_settings()
    resolve_policy("mode-selection") # -> "mms"
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Settings discovery
# ---------------------------------------------------------------------------

REPO_ROOT = Path(__file__).resolve().parent.parent

DEFAULTS = {
    "log_level": "warning",
    "threads": 0,
    "max_cycles": 10_000_000,
    "results_dir": str(REPO_ROOT / "results"),
}

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_settings_cache: dict | None = None


def settings_paths() -> list[Path]:
    """Candidate settings files, highest priority first."""
    paths = []
    if os.environ.get("WPMCC_SETTINGS"):
        paths.append(Path(os.environ["WPMCC_SETTINGS"]))
    paths.append(Path.home() / ".config" / "wpmcc" / "settings.json")
    paths.append(REPO_ROOT / "settings.json")
    return paths


def _load_settings() -> dict:
    """Load settings from the first available settings file."""
    for path in settings_paths():
        if path.exists():
            with open(path) as f:
                data = json.load(f)
            loaded = {"source": str(path)}
            for key, value in data.items():
                if key in DEFAULTS:
                    loaded[key] = value
                else:
                    logger.debug("Ignoring unknown settings key %r in %s", key, path)
            return loaded
    return {}


def get_settings() -> dict:
    """
    Get the runtime settings.

    Returns a dict with keys: log_level, threads, max_cycles, results_dir, source.
    Values can be overridden with environment variables:
        WPMCC_LOG, WPMCC_THREADS, WPMCC_MAX_CYCLES, WPMCC_RESULTS_DIR
    """
    global _settings_cache
    if _settings_cache is None:
        _settings_cache = _load_settings()

    return {
        "log_level": os.environ.get("WPMCC_LOG", _settings_cache.get("log_level", DEFAULTS["log_level"])),
        "threads": int(os.environ.get("WPMCC_THREADS", _settings_cache.get("threads", DEFAULTS["threads"]))),
        "max_cycles": int(os.environ.get("WPMCC_MAX_CYCLES", _settings_cache.get("max_cycles", DEFAULTS["max_cycles"]))),
        "results_dir": os.environ.get("WPMCC_RESULTS_DIR", _settings_cache.get("results_dir", DEFAULTS["results_dir"])),
        "source": _settings_cache.get("source", "env"),
    }


def reset_settings_cache() -> None:
    """Forget the cached settings file (tests and long-lived servers)."""
    global _settings_cache
    _settings_cache = None


def configure_logging(level: str | None = None) -> int:
    """
    Install a stderr handler on the ``wpmcc`` logger.

    Args:
        level: One of error, warn, warning, info, debug. Defaults to the
               WPMCC_LOG setting.

    Returns:
        The numeric logging level applied.

    Raises:
        ValueError: If the level name is unknown.
    """
    name = (level or get_settings()["log_level"]).lower()
    if name not in LOG_LEVELS:
        raise ValueError(f"Invalid log level '{name}'. Must be one of: {sorted(set(LOG_LEVELS))}")

    root = logging.getLogger("wpmcc")
    if not any(getattr(h, "_wpmcc", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        handler._wpmcc = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(LOG_LEVELS[name])
    return LOG_LEVELS[name]


# ---------------------------------------------------------------------------
# Policy catalog
# ---------------------------------------------------------------------------

POLICIES = {
    # Static channel
    "local-opt": "optimal CPU-cycle frequencies (threshold policy)",
    "local-equal-freq": "local computing at equal frequencies N/T",
    "offload-opt": "optimal MPT/offloading time division",
    "offload-equal-time": "offloading with equal time partition T/2",
    "mms": "mobile mode selection between local-opt and offload-opt",

    # Dynamic channel (M fading blocks)
    "dyn-subopt": "sub-optimal data allocation (local) + greedy allocation (offload)",
    "dyn-dp": "sub-optimal data allocation (local) + DP allocation (offload)",
    "dyn-equal": "equal data allocation across blocks",
}

# Ordered lists, in the order rows are written
STATIC_POLICIES = ["local-opt", "local-equal-freq", "offload-opt", "offload-equal-time", "mms"]
DYNAMIC_POLICIES = ["dyn-subopt", "dyn-dp", "dyn-equal"]

POLICY_ALIASES = {
    "local": "local-opt",
    "offload": "offload-opt",
    "mode-selection": "mms",
    "subopt": "dyn-subopt",
    "dp": "dyn-dp",
    "equal": "dyn-equal",
}


def resolve_policy(name: str) -> str:
    """
    Resolve a policy name or alias to its canonical catalog name.

    Examples:
        resolve_policy("local-opt")       -> "local-opt"
        resolve_policy("mode-selection")  -> "mms"
        resolve_policy("dp")              -> "dyn-dp"

    Raises:
        ValueError: If the name is neither a policy nor an alias.
    """
    canonical = POLICY_ALIASES.get(name, name)
    if canonical not in POLICIES:
        raise ValueError(f"Unknown policy '{name}'. Must be one of: {list(POLICIES)}")
    return canonical


# ---------------------------------------------------------------------------
# Quick self-test
# ---------------------------------------------------------------------------

if __name__ == "__main__":
    cfg = get_settings()
    print(f"Source:      {cfg['source']}")
    print(f"Log level:   {cfg['log_level']}")
    print(f"Threads:     {cfg['threads'] or 'auto'}")
    print(f"Max cycles:  {cfg['max_cycles']:,}")
    print(f"Results dir: {cfg['results_dir']}")
    print(f"\nPolicies:")
    for name, description in POLICIES.items():
        print(f"  {name:20s} -> {description}")

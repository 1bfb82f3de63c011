import json
import logging
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from wpmcc.cci import execution_probabilities
from wpmcc.local import thresholds
from wpmcc.simulation import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    SweepRow,
    _check_mode_trend,
    confidence_halfwidth,
    draw_trial,
    draw_trials,
    estimate,
    format_csv,
    load_config,
    parse_config,
    pivot_rows,
    resolve_threads,
    run_sweep,
    write_csv,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_BITS = 0.05                       # N = 78 cycles for Gamma(4, 200)
AVG_POWER = 5e-6


def base_config(**overrides) -> ExperimentConfig:
    """Small instance where local computing is feasible about half the time."""
    n, t, upsilon, bs_power = 78, 0.035, 0.8, 0.5
    # a = 1.5 * P_b * Omega at T = 35 ms
    gamma = 1.5 * bs_power * AVG_POWER * upsilon * t ** 3 / n ** 3
    data = {
        "data_bits": DATA_BITS,
        "deadline": t,
        "blocks": 2,
        "bs_power": bs_power,
        "upsilon": upsilon,
        "gamma": gamma,
        "cci": {"shape": 4, "scale": 200, "epsilon": 0.05},
        "channel": {"n_antennas": 2, "rician_k": 0, "avg_power": AVG_POWER},
        "trials": 400,
        "seed": 7,
    }
    data.update(overrides)
    return parse_config(data)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_config_defaults_and_aliases():
    cfg = parse_config({"policies": ["local", "mode-selection", "dp"]})
    assert cfg.policies == ["local-opt", "mms", "dyn-dp"]
    assert cfg.sweep_grid == [0.035]
    assert cfg.block_duration == pytest.approx(0.035 / 4)
    assert parse_config({}).policies[0] == "local-opt"


@pytest.mark.parametrize("data", [
    {"colour": "blue"},
    {"policies": ["local", "local-opt"]},
    {"policies": ["teleport"]},
    {"sweep": {"variable": "T", "grid": [0.02, 0.01]}},
    {"sweep": {"variable": "T", "grid": []}},
    {"sweep": {"variable": "L", "grid": [1.0]}},
    {"trials": 0},
    {"upsilon": 1.5},
])
def test_config_rejects_bad_input(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_config_sweep_point():
    cfg = base_config(sweep={"variable": "P_b", "grid": [0.1, 0.5, 1.0]})
    assert cfg.sweep_variable == "P_b"
    assert cfg.at(1.0).bs_power == 1.0
    assert cfg.at(1.0).deadline == cfg.deadline
    assert cfg.at(1.0).offload_config().bs_power == 1.0


def test_load_config(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"data_bits": 10, "trials": 50, "seed": 1}))
    cfg = load_config(path, trials=5, seed=None)
    assert cfg.data_bits == 10 and cfg.trials == 5 and cfg.seed == 1


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(bad)


@pytest.mark.parametrize("name", sorted(p.name for p in (REPO_ROOT / "configs").glob("*.json")))
def test_shipped_configs_validate(name):
    cfg = load_config(REPO_ROOT / "configs" / name)
    assert cfg.sweep is not None


# ---------------------------------------------------------------------------
# Draws and threads
# ---------------------------------------------------------------------------

def test_draws_are_reproducible():
    cfg = base_config()
    a, b = draw_trial(cfg, 3), draw_trial(cfg, 3)
    assert a.gain == b.gain and a.cci == b.cci
    np.testing.assert_array_equal(a.block_gains, b.block_gains)
    assert draw_trial(cfg, 4).gain != a.gain
    assert len(draw_trials(cfg)) == cfg.trials


def test_static_draws_ignore_block_count():
    a = draw_trial(base_config(blocks=1), 0)
    b = draw_trial(base_config(blocks=6), 0)
    assert a.gain == b.gain and a.cci == b.cci
    assert b.block_gains.size == 6


def test_resolve_threads(monkeypatch):
    from wpmcc.settings import reset_settings_cache

    assert resolve_threads(3) == 3
    assert resolve_threads(0) >= 1
    monkeypatch.setenv("WPMCC_THREADS", "2")
    reset_settings_cache()
    assert resolve_threads(None) == 2
    with pytest.raises(ValueError):
        resolve_threads(-1)


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------

def test_confidence_halfwidth():
    assert confidence_halfwidth(0.5, 100) == pytest.approx(0.098)
    assert confidence_halfwidth(0.01, 100) == 0.01
    assert confidence_halfwidth(0.0, 100) == 0.0
    assert confidence_halfwidth(1.0, 1) == 0.0


def test_single_trial():
    row = estimate("offload-opt", base_config(trials=1), threads=1)
    assert row.p_c in (0.0, 1.0)
    assert row.ci == 0.0
    assert row.trials == 1


def test_deterministic_cci_always_succeeds():
    cfg = base_config(cci={"kind": "deterministic", "value": 5.0}, data_bits=2, gamma=1e-28, trials=50)
    for policy in ("local-opt", "local-equal-freq", "mms"):
        row = estimate(policy, cfg, threads=1)
        assert row.p_c == 1.0 and row.ci == 0.0
        assert row.mean_savings > 0


def test_weak_channel_never_succeeds():
    cfg = base_config(channel={"avg_power": 1e-20}, trials=50)
    for policy in ("local-opt", "offload-opt", "mms"):
        row = estimate(policy, cfg, threads=1)
        assert row.p_c == 0.0
        assert math.isnan(row.mean_savings)


def test_local_opt_matches_semi_analytic_probability():
    cfg = base_config(trials=4000)
    row = estimate("local-opt", cfg, threads=2)

    probs = execution_probabilities(cfg.cci, cfg.data_bits)
    a, _ = thresholds(probs, cfg.local_config())
    x_min = a / (cfg.bs_power * AVG_POWER)
    # K = 0: h / Omega is Erlang(N_t)
    power_ok, _ = integrate.quad(lambda x: stats.gamma.pdf(x, cfg.channel.n_antennas), x_min, np.inf)
    cycles_ok = stats.gamma.cdf(probs.n / cfg.data_bits, 4, scale=200)
    expected = power_ok * cycles_ok
    assert 0.2 < expected < 0.8
    assert abs(row.p_c - expected) <= 4 * math.sqrt(expected * (1 - expected) / cfg.trials)


def test_results_independent_of_thread_count():
    cfg = base_config(
        trials=600,
        sweep={"variable": "T", "grid": [0.02, 0.035]},
        policies=["local-opt", "offload-opt", "mms", "dyn-subopt", "dyn-equal"],
    )
    serial = format_csv(run_sweep(cfg, threads=1))
    parallel = format_csv(run_sweep(cfg, threads=3))
    assert serial == parallel


def test_dp_policy_runs():
    cfg = base_config(trials=40, policies=["dyn-dp"], dp_grid={"energy_levels": 10, "data_levels": 6})
    row = estimate("dp", cfg, threads=1)
    assert 0.0 <= row.p_c <= 1.0


def test_sweep_orderings():
    cfg = base_config(
        trials=600,
        sweep={"variable": "T", "grid": [0.015, 0.025, 0.035, 0.05]},
        policies=["local-opt", "local-equal-freq", "offload-opt", "mms"],
    )
    rows = run_sweep(cfg, threads=2)
    assert [r.sweep_value for r in rows[:4]] == [0.015] * 4
    assert [r.policy for r in rows[:4]] == cfg.policies

    by_policy = {p: [r.p_c for r in rows if r.policy == p] for p in cfg.policies}
    # common random numbers make these orderings hold trial by trial
    for p in ("local-opt", "offload-opt"):
        assert by_policy[p] == sorted(by_policy[p])
    for local, mms in zip(by_policy["local-opt"], by_policy["mms"]):
        assert mms >= local
    for local, equal in zip(by_policy["local-opt"], by_policy["local-equal-freq"]):
        assert abs(local - equal) <= 1.0 / cfg.trials


def test_power_sweep_is_monotone():
    cfg = base_config(
        trials=300,
        sweep={"variable": "P_b", "grid": [0.1, 0.3, 0.5, 1.0]},
        policies=["local-opt", "offload-opt"],
    )
    rows = run_sweep(cfg, threads=1)
    for p in cfg.policies:
        values = [r.p_c for r in rows if r.policy == p]
        assert values == sorted(values)


def test_mode_trend_check(caplog):
    deltas = [np.array([1.0, -1.0, -1.0]), np.array([-1.0, 1.0, -1.0]), np.array([1.0, 1.0, np.nan])]
    with caplog.at_level(logging.WARNING, logger="wpmcc.simulation"):
        assert _check_mode_trend([0.01, 0.02, 0.03], deltas) == 2
    assert "flipped back" in caplog.text
    assert _check_mode_trend([0.01], deltas[:1]) == 0


@pytest.mark.slow
def test_reference_config_trends():
    cfg = load_config(REPO_ROOT / "configs" / "deadline_k0.json", trials=200)
    rows = run_sweep(cfg)
    local = [r.p_c for r in rows if r.policy == "local-opt"]
    mms = [r.p_c for r in rows if r.policy == "mms"]
    assert local == sorted(local)
    assert all(m >= l for l, m in zip(local, mms))


def _curves(rows):
    curves = {}
    for r in rows:
        curves.setdefault(r.policy, []).append(r)
    return curves


@pytest.mark.slow
def test_deadline_sweep_mode_crossing():
    cfg = load_config(REPO_ROOT / "configs" / "deadline_k0.json", trials=1000)
    curves = _curves(run_sweep(cfg))
    grid = cfg.sweep_grid
    local = {r.sweep_value: r for r in curves["local-opt"]}
    offload = {r.sweep_value: r for r in curves["offload-opt"]}
    # offloading wins for tight deadlines, local computing once the deadline is loose
    assert local[0.04].p_c < offload[0.04].p_c - 0.1
    assert local[grid[-1]].p_c > offload[grid[-1]].p_c + 0.1

    for name, rows in curves.items():
        for prev, cur in zip(rows, rows[1:]):
            assert cur.p_c >= prev.p_c - 2 * max(cur.ci, prev.ci), name
    for mms, lo, off in zip(curves["mms"], curves["local-opt"], curves["offload-opt"]):
        assert mms.p_c >= max(lo.p_c, off.p_c) - 2 * max(lo.ci, off.ci)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["power_k10.json", "power_k0.json"])
def test_power_sweep_shape(name):
    cfg = load_config(REPO_ROOT / "configs" / name, trials=1000)
    curves = _curves(run_sweep(cfg))
    for policy in ("local-opt", "offload-opt", "mms"):
        rows = curves[policy]
        for prev, cur in zip(rows, rows[1:]):
            assert cur.p_c >= prev.p_c - 2 * max(cur.ci, prev.ci), policy
    local, offload = curves["local-opt"][-1], curves["offload-opt"][-1]
    assert offload.p_c >= local.p_c - 2 * max(local.ci, offload.ci)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

ROWS = [
    SweepRow(0.01, "local-opt", 0.25, 0.1, 1e-7, 100),
    SweepRow(0.01, "mms", 0.5, 0.098, math.nan, 100),
    SweepRow(0.02, "local-opt", 0.75, 0.0849, 2e-7, 100),
]


def test_format_csv():
    lines = format_csv(ROWS).splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1] == "0.01,local-opt,0.25,0.1,1e-07,100"
    assert lines[2].endswith(",nan,100")


def test_write_csv(tmp_path):
    path = write_csv(ROWS, tmp_path / "nested" / "out.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").startswith(CSV_HEADER + "\n")
    assert len(raw.decode().splitlines()) == 4


def test_pivot_rows():
    table = pivot_rows(ROWS)
    assert table == [
        {"sweep_value": 0.01, "local-opt": 0.25, "mms": 0.5},
        {"sweep_value": 0.02, "local-opt": 0.75},
    ]


def test_row_dict():
    assert ROWS[0].to_dict()["mean_savings_j"] == 1e-7

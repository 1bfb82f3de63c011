"""
WPMCC Backend
=============
FastAPI backend exposing the policy solvers and Monte-Carlo sweeps.
"""

import json
import logging
import math
import sys
import uuid
from datetime import datetime
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel, Field

# Add project root to path so we can import wpmcc
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from wpmcc.allocation import (
    AllocationPlan,
    DpGrid,
    allocate_equal_local,
    allocate_equal_offload,
    allocate_local,
    allocate_offload_dp,
    allocate_offload_greedy,
)
from wpmcc.cci import CciModel, ResourceLimitError, execution_probabilities, scaling_factors
from wpmcc.channel import BlockGains
from wpmcc.local import LocalConfig, LocalPolicy, static_policy as local_static, thresholds
from wpmcc.mode import select
from wpmcc.offloading import OffloadConfig, OffloadPolicy, rho, static_policy as offload_static, threshold_a2, y_of_h
from wpmcc.settings import configure_logging, get_settings
from wpmcc.simulation import ExperimentConfig, run_sweep, write_csv

logger = logging.getLogger("wpmcc.backend")

# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

def results_dir() -> Path:
    path = Path(get_settings()["results_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def db_path() -> Path:
    return results_dir() / "runs_db.json"

# ---------------------------------------------------------------------------
# App
# ---------------------------------------------------------------------------

configure_logging()

app = FastAPI(title="WPMCC API", version="1.0.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:3000", "http://127.0.0.1:3000", "http://localhost:8000"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# ---------------------------------------------------------------------------
# Database helpers (JSON file)
# ---------------------------------------------------------------------------

def load_db() -> list[dict]:
    path = db_path()
    if path.exists():
        return json.loads(path.read_text())
    return []


def save_db(records: list[dict]):
    db_path().write_text(json.dumps(records, indent=2))


def _clean(value):
    """JSON-safe copy: nan/inf become None, numpy scalars become floats."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value

# ---------------------------------------------------------------------------
# Request models
# ---------------------------------------------------------------------------

class SystemRequest(BaseModel):
    data_bits: float = Field(default=1000.0, gt=0)
    deadline: float = Field(default=0.035, gt=0)
    bs_power: float = Field(default=0.5, gt=0)
    bandwidth: float = Field(default=1e6, gt=0)
    noise_var: float = Field(default=1e-9, gt=0)
    upsilon: float = Field(default=0.8, gt=0, le=1)
    gamma: float = Field(default=1e-28, gt=0)
    cci: CciModel = Field(default_factory=CciModel)

    def local_config(self, deadline: float | None = None) -> LocalConfig:
        return LocalConfig(
            gamma=self.gamma, upsilon=self.upsilon, bs_power=self.bs_power,
            deadline=deadline or self.deadline,
        )

    def offload_config(self, deadline: float | None = None) -> OffloadConfig:
        return OffloadConfig(
            bandwidth=self.bandwidth, noise_var=self.noise_var, upsilon=self.upsilon,
            bs_power=self.bs_power, deadline=deadline or self.deadline,
        )


class QueryRequest(SystemRequest):
    h: float = Field(gt=0)


class DynamicRequest(SystemRequest):
    gains: list[float] = Field(min_length=1)
    mode: Literal["local", "offload-greedy", "offload-dp", "equal-local", "equal-offload"] = "local"
    dp_grid: DpGrid = Field(default_factory=DpGrid)


class SweepRequest(ExperimentConfig):
    threads: int | None = Field(default=None, ge=0)

# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def _local_summary(policy: LocalPolicy, probs=None, cfg: LocalConfig | None = None) -> dict:
    out = {
        "feasible": policy.feasible,
        "regime": policy.regime.value,
        "lambda": None if policy.lambda_infinite else policy.lam,
        "lambda_infinite": policy.lambda_infinite,
        "avg_energy": policy.avg_energy,
        "savings": policy.savings,
    }
    if policy.feasible and policy.cycles:
        f = policy.frequencies
        out["frequencies"] = {
            "count": policy.cycles,
            "first": float(f[0]),
            "last": float(f[-1]),
            "min": float(f.min()),
            "max": float(f.max()),
        }
    if probs is not None and cfg is not None:
        a, a_prime = thresholds(probs, cfg)
        out["a"], out["a_prime"] = a, a_prime
    return out


def _offload_summary(policy: OffloadPolicy, cfg: OffloadConfig, h: float, bits: float) -> dict:
    return {
        "feasible": policy.feasible,
        "regime": policy.regime.value,
        "duration": policy.duration,
        "savings": policy.savings,
        "rho": rho(cfg, h),
        "y": y_of_h(cfg, h),
        "a2": threshold_a2(cfg, bits),
    }


def _plan_summary(plan: AllocationPlan) -> dict:
    return {
        "mode": plan.mode,
        "feasible": plan.feasible,
        "allocations": plan.allocations.tolist(),
        "residual_estimates": plan.residual_estimates.tolist(),
        "realized_residuals": plan.realized_residuals.tolist() if plan.realized_residuals is not None else None,
        "total_objective": plan.total_objective,
        "total_savings": plan.total_savings,
    }


def _probabilities(req: SystemRequest):
    try:
        return execution_probabilities(req.cci, req.data_bits)
    except ResourceLimitError as e:
        raise HTTPException(400, str(e))

# ---------------------------------------------------------------------------
# Policy endpoints
# ---------------------------------------------------------------------------

@app.get("/api/health")
async def health():
    return {"status": "ok"}


@app.post("/api/static-local")
def static_local(req: QueryRequest):
    probs = _probabilities(req)
    cfg = req.local_config()
    policy = local_static(probs, cfg, req.h)
    return _clean(_local_summary(policy, probs, cfg))


@app.post("/api/static-offload")
def static_offload(req: QueryRequest):
    cfg = req.offload_config()
    policy = offload_static(cfg, req.h, req.data_bits)
    return _clean(_offload_summary(policy, cfg, req.h, req.data_bits))


@app.post("/api/mode-select")
def mode_select(req: QueryRequest):
    probs = _probabilities(req)
    local_cfg, off_cfg = req.local_config(), req.offload_config()
    decision = select(local_static(probs, local_cfg, req.h), offload_static(off_cfg, req.h, req.data_bits))
    return _clean({
        "mode": decision.mode.value,
        "delta_savings": decision.delta_savings,
        "local": _local_summary(decision.local),
        "offload": _offload_summary(decision.offload, off_cfg, req.h, req.data_bits),
    })


@app.post("/api/dynamic")
def dynamic(req: DynamicRequest):
    if any(h <= 0 for h in req.gains):
        raise HTTPException(400, "gains must be positive")
    t_c = req.deadline / len(req.gains)
    gains = BlockGains(gains=np.asarray(req.gains, dtype=float), block_duration=t_c)
    try:
        if req.mode in ("local", "equal-local"):
            factors = scaling_factors(req.cci, req.data_bits / len(req.gains))
            allocate = allocate_local if req.mode == "local" else allocate_equal_local
            plan = allocate(req.data_bits, gains, req.local_config(), factors, req.cci)
        elif req.mode == "offload-greedy":
            plan = allocate_offload_greedy(req.data_bits, gains, req.offload_config())
        elif req.mode == "offload-dp":
            plan = allocate_offload_dp(req.data_bits, gains, req.offload_config(), req.dp_grid)
        else:
            plan = allocate_equal_offload(req.data_bits, gains, req.offload_config())
    except ResourceLimitError as e:
        raise HTTPException(400, str(e))
    return _clean(_plan_summary(plan))

# ---------------------------------------------------------------------------
# Sweep runs
# ---------------------------------------------------------------------------

@app.post("/api/sweeps")
def create_sweep(req: SweepRequest):
    cfg = ExperimentConfig.model_validate(req.model_dump(exclude={"threads"}))
    run_id = str(uuid.uuid4())
    filename = f"{run_id}.csv"
    try:
        rows = run_sweep(cfg, threads=req.threads)
        write_csv(rows, results_dir() / filename)
    except ResourceLimitError as e:
        raise HTTPException(400, str(e))
    except Exception as e:
        logger.exception("Sweep %s failed", run_id)
        raise HTTPException(500, f"Sweep failed: {e}")

    record = _clean({
        "id": run_id,
        "created_at": datetime.utcnow().isoformat(),
        "config": cfg.model_dump(),
        "rows": [r.to_dict() for r in rows],
        "filename": filename,
    })
    db = load_db()
    db.insert(0, record)
    save_db(db)
    logger.info("Sweep %s stored: %d rows", run_id, len(rows))
    return record


@app.get("/api/sweeps")
async def list_sweeps(page: int = 1, limit: int = 20):
    db = load_db()
    start = (page - 1) * limit
    end = start + limit
    return {
        "sweeps": db[start:end],
        "total": len(db),
        "page": page,
        "limit": limit,
    }


@app.get("/api/sweeps/{run_id}")
async def get_sweep(run_id: str):
    db = load_db()
    record = next((r for r in db if r["id"] == run_id), None)
    if not record:
        raise HTTPException(404, "Sweep not found")
    return record


@app.get("/api/sweeps/{run_id}/csv")
async def get_sweep_csv(run_id: str):
    db = load_db()
    record = next((r for r in db if r["id"] == run_id), None)
    if not record:
        raise HTTPException(404, "Sweep not found")
    path = results_dir() / record["filename"]
    if not path.exists():
        raise HTTPException(404, f"CSV file not found on server: {record['filename']}")
    return FileResponse(path, media_type="text/csv", filename=record["filename"])


@app.delete("/api/sweeps/{run_id}")
async def delete_sweep(run_id: str):
    db = load_db()
    record = next((r for r in db if r["id"] == run_id), None)
    if not record:
        raise HTTPException(404, "Sweep not found")
    path = results_dir() / record["filename"]
    if path.exists():
        path.unlink()
    save_db([r for r in db if r["id"] != run_id])
    return {"deleted": run_id}

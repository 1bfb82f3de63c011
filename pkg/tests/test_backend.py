import pytest
from fastapi.testclient import TestClient

from backend.main import app

client = TestClient(app)


def test_health():
    assert client.get("/api/health").json() == {"status": "ok"}


def test_static_local():
    res = client.post("/api/static-local", json={"h": 1e-5, "data_bits": 0.05})
    assert res.status_code == 200
    body = res.json()
    assert body["feasible"] is True
    assert body["frequencies"]["count"] == 78
    assert body["a"] < body["a_prime"]


def test_static_local_infeasible_is_not_an_error():
    res = client.post("/api/static-local", json={"h": 1e-30, "data_bits": 0.05, "gamma": 1e-10})
    assert res.status_code == 200
    body = res.json()
    assert body["feasible"] is False
    assert body["avg_energy"] is None


def test_static_offload():
    body = client.post("/api/static-offload", json={"h": 2e-5}).json()
    assert body["feasible"] is True
    assert 0 < body["duration"] < 0.035
    assert body["a2"] > 0


def test_static_offload_weak_gain():
    res = client.post("/api/static-offload", json={"h": 1e-11, "data_bits": 100})
    assert res.status_code == 200
    body = res.json()
    assert body["feasible"] is False
    assert body["rho"] is None


def test_mode_select():
    body = client.post("/api/mode-select", json={"h": 1e-5, "data_bits": 0.05}).json()
    assert body["mode"] in ("local", "offload")
    assert body["local"]["feasible"] and body["offload"]["feasible"]


@pytest.mark.parametrize("mode", ["local", "offload-greedy", "offload-dp", "equal-local", "equal-offload"])
def test_dynamic(mode):
    res = client.post("/api/dynamic", json={
        "gains": [1e-5, 2e-5],
        "data_bits": 0.05,
        "mode": mode,
        "dp_grid": {"energy_levels": 10, "data_levels": 6},
    })
    assert res.status_code == 200
    body = res.json()
    assert body["feasible"] is True
    assert sum(body["allocations"]) == pytest.approx(0.05)


def test_request_errors():
    assert client.post("/api/dynamic", json={"gains": [1e-5, -1.0]}).status_code == 400
    assert client.post("/api/static-local", json={"h": 1e-5, "data_bits": 1e6}).status_code == 400
    assert client.post("/api/static-local", json={"data_bits": 1.0}).status_code == 422
    assert client.post("/api/static-local", json={"h": 1e-5, "data_bits": 0.05, "colour": "red"}).status_code == 200


def test_sweep_lifecycle():
    res = client.post("/api/sweeps", json={
        "data_bits": 0.05,
        "trials": 20,
        "seed": 3,
        "sweep": {"variable": "T", "grid": [0.02, 0.035]},
        "policies": ["offload-opt", "local"],
        "threads": 1,
    })
    assert res.status_code == 200
    record = res.json()
    run_id = record["id"]
    assert len(record["rows"]) == 4
    assert record["config"]["policies"] == ["offload-opt", "local-opt"]

    listing = client.get("/api/sweeps").json()
    assert listing["total"] == 1
    assert listing["sweeps"][0]["id"] == run_id

    assert client.get(f"/api/sweeps/{run_id}").json()["filename"] == f"{run_id}.csv"
    csv = client.get(f"/api/sweeps/{run_id}/csv")
    assert csv.status_code == 200
    assert csv.text.startswith("sweep_value,policy,p_c,ci,mean_savings_j,trials")

    assert client.delete(f"/api/sweeps/{run_id}").json() == {"deleted": run_id}
    assert client.get(f"/api/sweeps/{run_id}").status_code == 404
    assert client.get("/api/sweeps").json()["total"] == 0


def test_sweep_errors():
    assert client.post("/api/sweeps", json={"policies": ["teleport"]}).status_code == 422
    res = client.post("/api/sweeps", json={"data_bits": 1e6, "trials": 2, "policies": ["local-opt"]})
    assert res.status_code == 400
    assert client.get("/api/sweeps/missing").status_code == 404
    assert client.delete("/api/sweeps/missing").status_code == 404

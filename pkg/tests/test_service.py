"""HTTP service: endpoints, schemas, error-to-status mapping."""

import pytest
from fastapi.testclient import TestClient

from warpsim.harness import CSV_HEADER
from warpsim.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert "version" in body


def test_benchmark_listing(client):
    body = client.get("/benchmarks").json()
    by_name = {b["name"]: b for b in body["benchmarks"]}
    assert len(by_name) == 8
    assert by_name["saxpy"]["variants"] == ["base", "cfm", "cfm+lps", "full"]
    assert by_name["gcn_aggr"]["variants"] == ["base", "cfm", "cfm+lps"]
    assert len(by_name["sgemm"]["points"]) == 5


def test_run_returns_rows_stats_and_csv(client):
    resp = client.post("/run", json={"bench": "vecadd", "variant": "full",
                                     "point": 256})
    assert resp.status_code == 200
    body = resp.json()
    assert [r["variant"] for r in body["rows"]] == ["base", "full"]
    assert body["rows"][1]["speedup"] > 1.0
    assert body["csv"].splitlines()[0] == CSV_HEADER
    assert body["stats"]["instrs"] == body["rows"][1]["instr_total"]
    assert body["config"]["warps"] == 8


def test_run_applies_config_override(client):
    resp = client.post("/run", json={"bench": "vecadd", "variant": "base",
                                     "point": 64,
                                     "config": {"warps": 2, "threads": 4}})
    assert resp.status_code == 200
    row = resp.json()["rows"][0]
    assert (row["W"], row["T"]) == (2, 4)


def test_unknown_bench_is_400_exit_2(client):
    resp = client.post("/run", json={"bench": "fft"})
    assert resp.status_code == 400
    body = resp.json()
    assert body["exit_code"] == 2
    assert "fft" in body["detail"]


def test_unsupported_variant_is_400(client):
    resp = client.post("/run", json={"bench": "gcn_aggr",
                                     "variant": "full", "point": 64})
    assert resp.status_code == 400
    assert resp.json()["error"] == "UnsupportedVariant"


def test_invalid_hardware_shape_is_400(client):
    resp = client.post("/run", json={"bench": "vecadd", "point": 64,
                                     "config": {"threads": 10}})
    assert resp.status_code == 400
    assert resp.json()["exit_code"] == 2


def test_unknown_config_key_is_422(client):
    resp = client.post("/run", json={"bench": "vecadd",
                                     "config": {"lanes": 4}})
    assert resp.status_code == 422


def test_matrix_endpoint(client):
    resp = client.post("/matrix", json={"benches": ["vecadd"],
                                        "points": [256], "workers": 1})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["rows"]) == 4
    assert "vecadd/full" in body["aggregates"]


def test_ports_endpoint(client):
    resp = client.post("/ports", json={"ports": [1, 2], "point": 640})
    assert resp.status_code == 200
    entries = resp.json()["entries"]
    assert [e["P"] for e in entries] == [1, 2]
    assert entries[1]["cycles"] <= entries[0]["cycles"]


def test_scalability_endpoint(client):
    resp = client.post("/scalability", json={"threads_axis": [4],
                                             "warps_axis": [],
                                             "workers": 1})
    assert resp.status_code == 200
    entries = resp.json()["entries"]
    assert len(entries) == 1
    assert entries[0]["W"] == 8 and entries[0]["T"] == 4
    assert entries[0]["avg_speedup"] > 1.0


def test_assemble_round_trip(client):
    resp = client.post("/assemble",
                       json={"source": "    addi t0, zero, 5\n    halt\n"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["count"] == 2
    assert body["words"][0] == "0x00500293"
    assert "addi" in body["listing"]


def test_assemble_error_is_400(client):
    resp = client.post("/assemble", json={"source": "    frobnicate x9\n"})
    assert resp.status_code == 400
    assert resp.json()["exit_code"] == 2

"""Service surface tests via the in-process ASGI transport; this doubles
as the wire-format check for service clients."""

import copy

import pytest
from starlette.testclient import TestClient

from proxalloc.service import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def shrunk(doc, t_end=2.0):
    doc = copy.deepcopy(doc)
    doc["integrator"]["t_end"] = t_end
    doc["integrator"]["stop_tol"] = 0.0
    doc["integrator"]["record_every"] = 100
    doc.pop("oracle", None)
    return doc


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_check_section5(client, s5_doc):
    resp = client.post("/check", json={"scenario": s5_doc})
    assert resp.status_code == 200
    body = resp.json()
    assert body["spectral"]["h"] == pytest.approx([0.2, 0.2, 0.4, 0.2], abs=1e-10)
    assert body["spectral"]["balanced"] is False
    assert body["assumptions"]["passed"] is True
    assert body["params"]["valid"] is True
    assert body["params"]["feasible"] is False
    assert "alpha" in body["params"]["margins"]
    assert body["normalized"]["schema"] == 1


def test_run_tiny(client, tiny_doc):
    resp = client.post("/run", json={"scenario": tiny_doc})
    assert resp.status_code == 200
    body = resp.json()
    assert body["exit_code"] == 0
    assert len(body["runs"]) == 1
    run = body["runs"][0]
    assert run["mode"] == "known_h"
    assert run["status"] == "converged"
    header = run["trajectory_csv"].split("\n", 1)[0]
    assert header.startswith("t,x_1_1")
    assert body["summary_document"]["runs"][0]["summary"]["final_residuals"]["r_feas"] <= 1e-6


def test_run_mode_override(client, s5_doc):
    resp = client.post("/run", json={"scenario": shrunk(s5_doc), "mode": "known_h"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["runs"][0]["mode"] == "known_h"
    assert body["exit_code"] == 2          # horizon cut short, no convergence
    assert "y_1" not in body["runs"][0]["trajectory_csv"].split("\n", 1)[0]


def test_run_gate_and_force(client, s5_doc):
    doc = shrunk(s5_doc)
    doc["params"] = {"alpha": 5.0, "gamma": 0.6}
    resp = client.post("/run", json={"scenario": doc})
    body = resp.json()
    assert body["exit_code"] == 1
    assert "gamma" in body["error"]
    assert body["runs"] == []

    forced = client.post("/run", json={"scenario": doc, "force": True}).json()
    assert forced["exit_code"] in (0, 2)
    assert forced["runs"]
    assert any("forced" in w for w in forced["warnings"])


def test_run_warns_on_infeasible_sufficient_conditions(client, s5_doc):
    resp = client.post("/run", json={"scenario": shrunk(s5_doc)})
    body = resp.json()
    assert body["exit_code"] in (0, 2)
    assert any("sufficient" in w for w in body["warnings"])


def test_invalid_scenario_is_400(client, s5_doc):
    doc = copy.deepcopy(s5_doc)
    del doc["graph"]
    resp = client.post("/check", json={"scenario": doc})
    assert resp.status_code == 400
    assert "graph" in resp.json()["detail"]


def test_run_both_modes(client, s5_doc):
    doc = shrunk(s5_doc)
    doc["mode"] = "both"
    resp = client.post("/run", json={"scenario": doc})
    assert resp.status_code == 200
    body = resp.json()
    assert [r["mode"] for r in body["runs"]] == ["known_h", "estimator"]
    assert body["exit_code"] == 2


def test_compare_disagreement_path(client, s5_doc):
    # a horizon this short leaves the two variants visibly apart, which
    # must surface as agreement=False and exit code 2
    doc = shrunk(s5_doc, t_end=2.0)
    doc["mode"] = "both"
    doc["agreement_tol"] = 1e-6
    resp = client.post("/compare", json={"scenario": doc})
    body = resp.json()
    cmp_doc = body["compare"]
    assert "known_h_vs_estimator" in cmp_doc["distances"]
    assert cmp_doc["agreement"] is False
    assert body["exit_code"] == 2


def test_compare_tiny_with_grid_oracle(client, tiny_doc):
    resp = client.post("/compare", json={"scenario": tiny_doc})
    assert resp.status_code == 200
    body = resp.json()
    cmp_doc = body["compare"]
    # single-mode compare runs the same flow twice: distance exactly zero
    assert cmp_doc["distances"]["known_h#1_vs_known_h#2"] == 0.0
    assert cmp_doc["oracle"]["method"] == "grid"
    assert cmp_doc["agreement"] is True
    assert body["exit_code"] == 0

import pytest
from fastapi.testclient import TestClient

from app.main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"
    assert response.json()["version"] == "1.0.0"


def test_list_scenarios(client):
    response = client.get("/api/scenarios")
    assert response.status_code == 200
    names = [s["name"] for s in response.json()]
    assert "hopf" in names and "plane_curves" in names


def test_describe_scenario(client):
    body = client.get("/api/scenarios/flat_torus_pair").json()
    assert body["f1"] == "canonical"
    assert body["trust_radius"] == 1.0
    assert body["constants"]["map_distance_sup"] == pytest.approx(0.3)
    assert body["assumptions"]["sec_base_abs_max"] == 0.0


def test_unknown_scenario_is_404(client):
    assert client.get("/api/scenarios/klein_bottle").status_code == 404


def test_unknown_config_key_is_422(client):
    response = client.post("/api/experiments/validate", json={"scenario": {"name": "hopf"}, "experimens": []})
    assert response.status_code == 422


def test_validate_resolves_the_scenario(client):
    response = client.post(
        "/api/experiments/validate",
        json={"scenario": {"name": "hopf", "params": {"rotation": 0.1}}, "experiments": [{"kind": "tensors"}]},
    )
    assert response.status_code == 200
    assert response.json()["experiments"] == [{"name": "tensors", "kind": "tensors"}]


def test_validate_rejects_bad_scenario_params(client):
    response = client.post("/api/experiments/validate", json={"scenario": {"name": "hopf", "params": {"rotation": 3}}})
    assert response.status_code == 400


def test_run_unknown_scenario_is_400(client):
    response = client.post("/api/experiments/run", json={"scenario": {"name": "klein_bottle"}})
    assert response.status_code == 400
    assert "klein_bottle" in response.json()["detail"]


def test_run_small_config(client):
    response = client.post(
        "/api/experiments/run",
        json={
            "scenario": {"name": "flat_torus_pair", "params": {"a": 0.2}},
            "experiments": [{"kind": "bounds", "bounds": ["holonomy"], "grid": [1, 2]}],
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["passed"] is True
    assert body["files"] == []
    assert [row["name"] for row in body["bounds"]] == ["bounds.holonomy[0]", "bounds.holonomy[1]"]
    assert body["report"]["results"][0]["bound_reports"][0]["pass"] is True

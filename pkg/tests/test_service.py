"""HTTP service behavior via the in-process test client."""

import json

import pytest
from fastapi.testclient import TestClient

from mocomp import __version__
from mocomp.planner import ReplayBackend
from mocomp.planner.prompt import SCENARIO_2_RESPONSE
from mocomp.service import app, get_backend

from test_pipeline import write_motion, write_phys


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c
    app.dependency_overrides.clear()


def run_payload(config_path, out_dir, **kwargs):
    payload = {"config_path": str(config_path), "out_dir": str(out_dir)}
    payload.update(kwargs)
    return payload


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "version": __version__}


class TestRunEndpoints:
    def test_plan(self, client, tmp_path):
        config = write_phys(tmp_path)
        response = client.post(
            "/plan", json=run_payload(config, tmp_path / "out", offline=True)
        )
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["manifest"]["stages"]["plan"]["method"] == "InteractPhys"
        decision = json.loads((tmp_path / "out" / "decision.json").read_text())
        assert decision["segmentation_prompts"] == ["a rubber ball", "a wooden floor"]

    def test_simulate(self, client, tmp_path):
        config = write_phys(tmp_path)
        response = client.post("/simulate", json=run_payload(config, tmp_path / "out"))
        assert response.status_code == 200
        assert (tmp_path / "out" / "trajectory" / "summary.csv").exists()

    def test_pipeline_motion(self, client, tmp_path):
        config = write_motion(tmp_path)
        response = client.post(
            "/pipeline",
            json=run_payload(config, tmp_path / "out", seed=5, offline=True),
        )
        assert response.status_code == 200
        manifest = response.json()["manifest"]
        assert manifest["stages"]["plan"]["method"] == "InteractMotion"
        assert (tmp_path / "out" / "selected.png").exists()

    def test_stage_failure_maps_to_400(self, client, tmp_path):
        path = tmp_path / "scene.toml"
        path.write_text("[sim]\ndt = 1e-3\n")  # no [scenario]
        response = client.post(
            "/plan", json=run_payload(path, tmp_path / "out", offline=True)
        )
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert detail["failed_stage"] == "plan"
        assert "scenario" in detail["error"]
        # the manifest is still written for post-mortem inspection
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "failed"

    def test_config_error_maps_to_400(self, client, tmp_path):
        response = client.post(
            "/simulate", json=run_payload(tmp_path / "missing.toml", tmp_path / "out")
        )
        assert response.status_code == 400
        assert response.json()["detail"]["failed_stage"] == "load_config"

    def test_validation_error_maps_to_422(self, client):
        response = client.post("/plan", json={"out_dir": "x"})
        assert response.status_code == 422

    def test_injected_backend_drives_planning(self, client, tmp_path):
        backend = ReplayBackend([SCENARIO_2_RESPONSE])
        app.dependency_overrides[get_backend] = lambda: backend
        config = write_motion(tmp_path)
        response = client.post(
            "/plan", json=run_payload(config, tmp_path / "out", offline=False)
        )
        assert response.status_code == 200
        assert len(backend.requests) == 1
        decision = json.loads((tmp_path / "out" / "decision.json").read_text())
        assert decision["method"] == "InteractMotion"
        assert decision["split_ratio"] == "1,(1,1); 2"

    def test_overrides_and_seed_forwarded(self, client, tmp_path):
        config = write_motion(tmp_path)
        response = client.post(
            "/inpaint",
            json=run_payload(
                config,
                tmp_path / "out",
                overrides=["inpaint.frames=2"],
                seed=9,
            ),
        )
        assert response.status_code == 200
        manifest = response.json()["manifest"]
        assert manifest["seed"] == 9
        assert len(manifest["stages"]["inpaint"]["frames"]) == 2

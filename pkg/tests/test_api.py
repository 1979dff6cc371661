"""Tests for the HTTP API."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.core.config import Settings, get_settings
from app.main import app

PREFIX = "/api/v1"


@pytest.fixture
def client():
    return TestClient(app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy"}


def test_cka_of_a_representation_with_itself(client, rng):
    x = rng.standard_normal((12, 3)).tolist()
    response = client.post(f"{PREFIX}/similarity/cka", json={"x": x, "y": x})
    assert response.status_code == 200
    body = response.json()
    assert body["cka"] == pytest.approx(1.0)
    assert body["n_examples"] == 12
    assert body["config"]["estimator"] == "unbiased"


def test_degenerate_input_is_an_engine_error(client, rng):
    x = rng.standard_normal((6, 2)).tolist()
    response = client.post(f"{PREFIX}/similarity/cka", json={"x": x, "y": np.ones((6, 2)).tolist()})
    assert response.status_code == 422
    assert response.json()["error"]["kind"] == "degenerate_representation"


@pytest.fixture
def data_root(tmp_path):
    app.dependency_overrides[get_settings] = lambda: Settings(DATA_ROOT=tmp_path)
    yield tmp_path
    app.dependency_overrides.clear()


def test_self_similarity(client, data_root, planted_manifest):
    relative = planted_manifest.relative_to(data_root)
    response = client.post(f"{PREFIX}/similarity/self", json={"manifest": str(relative)})
    assert response.status_code == 200
    body = response.json()
    assert len(body["values"]) == 6
    assert body["row_model"]["model_id"] == "planted"


@pytest.mark.parametrize("manifest", ["../outside/manifest.json", "/etc/passwd"])
def test_self_similarity_stays_under_data_root(client, data_root, manifest):
    response = client.post(f"{PREFIX}/similarity/self", json={"manifest": manifest})
    assert response.status_code == 403


def test_architecture(client):
    response = client.get(f"{PREFIX}/architectures/physnet3dcnn/10")
    assert response.status_code == 200
    body = response.json()
    assert body["param_count"] == 1386497
    assert body["violations"] == []
    assert body["descriptor"]["output_spatial"] == 1


def test_architecture_depth_out_of_range(client):
    response = client.get(f"{PREFIX}/architectures/tscan/11")
    assert response.status_code == 422
    assert response.json()["error"]["kind"] == "argument"


def test_validate_broken_descriptor(client):
    descriptor = client.get(f"{PREFIX}/architectures/tscan/2").json()["descriptor"]
    descriptor["pooling"][0]["stride"] = 4
    response = client.post(f"{PREFIX}/architectures/validate", json=descriptor)
    assert response.status_code == 200
    body = response.json()
    assert body["param_count"] is None
    assert "pooling_stride" in {v["rule"] for v in body["violations"]}

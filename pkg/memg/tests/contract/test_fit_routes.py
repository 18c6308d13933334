import numpy as np
import pytest

from app.echo.model import eval_model
from app.echo.models import EchoParams, ParamSet

FS_KHZ = 300.0
ECHOES = ParamSet(
    components=(
        EchoParams(alpha=80.0, mu=0.6, sigma=0.05, eta=0.8, freq=50.0, phase=0.3),
        EchoParams(alpha=50.0, mu=1.3, sigma=0.06, eta=-0.6, freq=50.0, phase=-1.0),
    )
)


def _samples() -> list[float]:
    return eval_model(ECHOES, np.arange(600) / FS_KHZ).tolist()


def test_fit_response_shape(client):
    response = client.post(
        "/api/fit",
        json={
            "samples": _samples(),
            "fs_khz": FS_KHZ,
            "frame_index": 7,
            "f_e_khz": 50.0,
        },
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["frame_index"] == 7
    assert [s["name"] for s in payload["stages"]] == ["envelope", "oscillation", "joint"]
    assert len(payload["reconstruction"]) == 600
    assert [c["mu"] for c in payload["components"]] == pytest.approx([0.6, 1.3], abs=0.01)
    assert all(c["confidence"] is not None for c in payload["components"])
    assert payload["frame_confidence"] > 1.0


def test_fit_envelope_plan(client):
    response = client.post(
        "/api/fit",
        json={
            "samples": _samples(),
            "fs_khz": FS_KHZ,
            "f_e_khz": 50.0,
            "sigma_init": 0.04,
            "plan": "envelope",
        },
    )
    assert response.status_code == 200
    assert [s["name"] for s in response.json()["stages"]] == ["envelope"]


def test_fit_rejects_short_frame(client):
    response = client.post("/api/fit", json={"samples": [1.0], "fs_khz": FS_KHZ})
    assert response.status_code == 422


def test_fit_rejects_unknown_plan(client):
    response = client.post(
        "/api/fit", json={"samples": _samples(), "fs_khz": FS_KHZ, "plan": "spline"}
    )
    assert response.status_code == 422


def test_fit_without_echoes_returns_error_envelope(client):
    response = client.post(
        "/api/fit",
        json={"samples": [0.0] * 300, "fs_khz": FS_KHZ, "f_e_khz": 50.0},
        headers={"x-request-id": "flat-frame"},
    )
    assert response.status_code == 400
    payload = response.json()
    assert payload["error"]["type"] == "numerical_error"
    assert payload["error"]["code"] == "NoComponentsError"
    assert payload["detail"] == payload["error"]["message"]
    assert payload["trace_id"] == "flat-frame"


def test_fit_enforces_sample_limit(client):
    response = client.post("/api/fit", json={"samples": [0.0] * 20001, "fs_khz": FS_KHZ})
    assert response.status_code == 422
    assert response.json()["error"]["type"] == "usage_error"

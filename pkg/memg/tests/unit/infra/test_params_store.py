import json

import pytest

from app.echo.models import EchoParams, FitResult, ParamSet, StageResult
from app.infra.files.params_store import params_json, read_params, write_params
from app.shared.exceptions import FormatError, SchemaVersionError


def _fit(index: int) -> FitResult:
    return FitResult(
        params=ParamSet(
            components=(
                EchoParams(alpha=80.0, mu=0.6, sigma=0.05, eta=0.8, freq=50.0, phase=0.3),
                EchoParams(alpha=50.0, mu=1.3, sigma=0.06, eta=-0.6, freq=49.5, phase=-1.0),
            ),
            frame_index=index,
        ),
        stages=(StageResult(name="envelope", start_loss=10.0, final_loss=1.0),),
        degraded=index == 1,
        frame_confidence=12.5,
        component_confidences=(3.0, None),
    )


def test_fits_survive_a_write(tmp_path):
    fits = [_fit(0), _fit(1)]

    loaded = read_params(write_params(fits, tmp_path / "params.json"))

    assert loaded == fits


def test_document_carries_schema_version():
    doc = json.loads(params_json([_fit(0)]))

    assert doc["schema_version"] == 1
    assert doc["frames"][0]["components"][1]["confidence"] is None
    assert "trace" not in json.dumps(doc)


def test_version_mismatch_is_refused(tmp_path):
    path = write_params([_fit(0)], tmp_path / "params.json")

    with pytest.raises(SchemaVersionError):
        read_params(path, schema_version=2)


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "params.json"
    path.write_text('{\n  "schema_version": 1,\n  "frames": [\n}\n')

    with pytest.raises(FormatError, match=r"params.json:4:"):
        read_params(path)


def test_missing_version_is_a_format_error(tmp_path):
    path = tmp_path / "params.json"
    path.write_text('{"frames": []}')

    with pytest.raises(FormatError, match="schema_version"):
        read_params(path)

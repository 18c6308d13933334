from pathlib import Path
from typing import Generator

import pytest
from fastapi.testclient import TestClient

from app.cli.main import main
from app.core.application import create_app
from app.core.config import Settings

TESTS_DIR = Path(__file__).parents[1]


@pytest.fixture(autouse=True, scope="session")
def patch_settings_env_file_location() -> Generator[None, None, None]:
    monkeypatch = pytest.MonkeyPatch()
    monkeypatch.setitem(Settings.model_config, "env_file", str(TESTS_DIR / "test-env"))
    yield
    monkeypatch.undo()


@pytest.fixture()
def client() -> Generator[TestClient, None, None]:
    app = create_app()
    with TestClient(app) as client:
        yield client


@pytest.fixture()
def synth_dir(tmp_path: Path) -> Path:
    out = tmp_path / "synth"
    code = main(["synth", "--samples", "3000", "--k", "2", "--output", str(out), "--quiet"])
    assert code == 0
    return out

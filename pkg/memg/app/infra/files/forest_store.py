from pathlib import Path

from app.echo.features import StandardScale
from app.echo.forest import TrainedForest
from app.infra.files._documents import load_document, write_document
from app.infra.model.forest_model import FOREST_SCHEMA_VERSION, ForestDoc


def write_forest(forest: TrainedForest, path: Path, scale: StandardScale | None = None) -> Path:
    doc = ForestDoc(schema_version=FOREST_SCHEMA_VERSION, forest=forest, scale=scale)
    return write_document(Path(path), doc)


def read_forest(
    path: Path, schema_version: int = FOREST_SCHEMA_VERSION
) -> tuple[TrainedForest, StandardScale | None]:
    doc = load_document(Path(path), ForestDoc, schema_version)
    return doc.forest, doc.scale

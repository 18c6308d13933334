import pytest

from app.echo.features import CLASSIFIER_COLUMNS, fit_scale, standardize
from app.echo.forest import ForestConfig, predict, train
from app.echo.synth import separable_feature_set
from app.infra.files.forest_store import read_forest, write_forest
from app.shared.exceptions import SchemaVersionError


def test_forest_survives_a_write(tmp_path):
    rows = separable_feature_set(n_frames=6).select(CLASSIFIER_COLUMNS)
    scale = fit_scale(rows)
    forest = train(standardize(rows, scale), ForestConfig(n_trees=3))

    loaded, loaded_scale = read_forest(write_forest(forest, tmp_path / "forest.json", scale))

    assert loaded == forest
    assert loaded_scale == scale
    scaled = standardize(rows, loaded_scale)
    assert predict(loaded, scaled).labels.tolist() == predict(forest, scaled).labels.tolist()


def test_forest_version_mismatch(tmp_path):
    rows = separable_feature_set(n_frames=6).select(CLASSIFIER_COLUMNS)
    path = write_forest(train(rows, ForestConfig(n_trees=1)), tmp_path / "forest.json")

    with pytest.raises(SchemaVersionError):
        read_forest(path, schema_version=3)

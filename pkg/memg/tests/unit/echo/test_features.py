import numpy as np
import pytest

from app.echo.features import (
    CLASSIFIER_COLUMNS,
    FEATURE_COLUMNS,
    FeatureMatrix,
    build_feature_matrix,
    component_confidence,
    fit_scale,
    frame_confidence,
    reject_outliers,
    score_fit,
    standardize,
)
from app.echo.model import eval_model
from app.echo.models import EchoParams, FitResult, Frame, ParamSet
from app.echo.preprocess import hilbert_envelope
from app.shared.constants import CONFIDENCE_EPSILON
from app.shared.exceptions import (
    DegenerateFeatureError,
    ShapeError,
    UndefinedConfidenceError,
    WindowError,
)

FS_KHZ = 300.0
ECHOES = ParamSet(
    components=(
        EchoParams(alpha=80.0, mu=0.6, sigma=0.05, eta=0.8, freq=50.0, phase=0.3),
        EchoParams(alpha=50.0, mu=1.3, sigma=0.06, eta=-0.6, freq=50.0, phase=-1.0),
    )
)


def _frame(ps: ParamSet = ECHOES, index: int = 0) -> Frame:
    x = np.arange(600) / FS_KHZ
    return Frame.from_rate(eval_model(ps, x), FS_KHZ, frame_index=index)


def test_exact_fit_reaches_confidence_cap():
    fit = FitResult(params=ECHOES)

    assert frame_confidence(fit, _frame()) == pytest.approx(1.0 / CONFIDENCE_EPSILON)


def test_frame_confidence_of_empty_model():
    frame = _frame()
    fit = FitResult(params=ParamSet())

    peak = frame.samples.max()
    expected = 1.0 / np.linalg.norm(frame.samples / peak)
    assert frame_confidence(fit, frame) == pytest.approx(expected)


def _with_first_alpha(alpha: float) -> ParamSet:
    first = ECHOES.components[0].model_copy(update={"alpha": alpha})
    return ECHOES.model_copy(update={"components": (first, *ECHOES.components[1:])})


def test_confidence_decreases_with_residual():
    frame = _frame()
    small = _with_first_alpha(79.0)
    large = _with_first_alpha(70.0)

    assert frame_confidence(FitResult(params=small), frame) > frame_confidence(
        FitResult(params=large), frame
    )


def test_envelope_fit_is_scored_against_the_envelope():
    frame = _frame()
    fit = FitResult(params=ECHOES, oscillating=False)

    model = eval_model(ECHOES, frame.x, oscillating=False)
    envelope = hilbert_envelope(frame)
    expected = 1.0 / np.linalg.norm(model / envelope.max() - envelope / envelope.max())
    assert frame_confidence(fit, frame) == pytest.approx(expected)


def test_frame_confidence_undefined_without_positive_peak():
    frame = Frame.from_rate(-np.ones(100), FS_KHZ)

    with pytest.raises(UndefinedConfidenceError):
        frame_confidence(FitResult(params=ECHOES), frame)


def test_component_confidence_uses_window():
    frame = _frame()
    fit = FitResult(params=ECHOES)

    assert component_confidence(fit, frame, 0) > 1e9
    outside = FitResult(
        params=ParamSet(components=(EchoParams(alpha=1.0, mu=10.0, sigma=0.05),))
    )
    with pytest.raises(WindowError):
        component_confidence(outside, frame, 0)


def test_score_fit_leaves_undefined_confidences_empty():
    frame = Frame.from_rate(np.zeros(600), FS_KHZ)
    fit = FitResult(
        params=ParamSet(
            components=(
                EchoParams(alpha=1.0, mu=1.0, sigma=0.05),
                EchoParams(alpha=1.0, mu=10.0, sigma=0.05),
            )
        )
    )

    scored = score_fit(fit, frame)

    assert scored.frame_confidence is None
    assert scored.component_confidences[0] is not None
    assert scored.component_confidences[1] is None


def test_reject_outliers():
    ps = ParamSet(
        components=(
            EchoParams(alpha=1.0, mu=-0.1, sigma=0.05),
            EchoParams(alpha=1.0, mu=0.5, sigma=0.05),
            EchoParams(alpha=1.0, mu=0.7, sigma=-0.05),
            EchoParams(alpha=1.0, mu=3.0, sigma=0.05),
        ),
        frame_index=4,
    )

    kept, rejected = reject_outliers(ps, x_end=2.0)

    assert rejected == [0, 2, 3]
    assert [p.mu for p in kept.components] == [0.5]
    assert kept.frame_index == 4
    assert reject_outliers(ps)[1] == [0, 2]


def test_build_feature_matrix_labels_by_gate():
    frames = [_frame(index=i) for i in (0, 1)]
    fits = [FitResult(params=ECHOES.model_copy(update={"frame_index": i})) for i in (0, 1)]

    features = build_feature_matrix(fits, frames, gate=(1.0, 1.5))

    assert features.columns == FEATURE_COLUMNS
    assert features.n_rows == 4
    assert features.frames.tolist() == [0, 0, 1, 1]
    assert features.components.tolist() == [0, 1, 0, 1]
    assert features.labels.tolist() == [0, 1, 0, 1]
    np.testing.assert_allclose(features.column("mu"), [0.6, 1.3, 0.6, 1.3])


def test_build_feature_matrix_skips_rejected_components():
    ps = ECHOES.model_copy(
        update={"components": ECHOES.components + (EchoParams(alpha=5.0, mu=9.0, sigma=0.05),)}
    )

    features = build_feature_matrix([FitResult(params=ps)], [_frame()])

    assert features.n_rows == 2
    assert features.labels is None


def test_build_feature_matrix_without_rows():
    features = build_feature_matrix([], [])

    assert features.n_rows == 0
    assert features.values.shape == (0, len(FEATURE_COLUMNS))


def _table(rows: int = 12, seed: int = 0) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    return FeatureMatrix(
        frames=np.arange(rows) // 3,
        components=np.arange(rows) % 3,
        values=rng.normal([100.0, 1.0, 0.05, 0.5, 50.0, 0.0, 3.0], 2.0, size=(rows, 7)),
        labels=np.arange(rows) % 2,
    )


def test_standardize_gives_zero_mean_unit_spread():
    scaled = standardize(_table())

    np.testing.assert_allclose(scaled.values.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(scaled.values.std(axis=0, ddof=1), 1.0, atol=1e-9)
    assert scaled.scale is not None


def test_standardize_with_training_scale():
    train = _table(seed=1)
    test = _table(seed=2)
    scale = fit_scale(train)

    scaled = standardize(test, scale)

    expected = (test.values - np.array(scale.mean)) / np.array(scale.std)
    np.testing.assert_allclose(scaled.values, expected)
    assert scaled.labels.tolist() == test.labels.tolist()


def test_fit_scale_rejects_degenerate_tables():
    with pytest.raises(DegenerateFeatureError):
        fit_scale(_table(rows=1))
    flat = _table()
    flat = flat.model_copy(update={"values": np.column_stack([flat.values[:, :6], np.ones(12)])})
    with pytest.raises(DegenerateFeatureError):
        fit_scale(flat)


def test_select_and_take():
    table = _table()

    chosen = table.select(CLASSIFIER_COLUMNS).take(np.array([0, 2]))

    assert chosen.columns == CLASSIFIER_COLUMNS
    assert chosen.values.shape == (2, 3)
    np.testing.assert_array_equal(chosen.column("conf"), table.values[[0, 2], 6])
    with pytest.raises(ShapeError):
        table.select(["depth"])


def test_standardize_rejects_other_columns():
    table = _table()
    scale = fit_scale(table)

    with pytest.raises(ShapeError):
        standardize(table.select(CLASSIFIER_COLUMNS), scale)

import math
import time

import numpy as np
import pytest

from app.echo.model import eval_model
from app.echo.models import EchoParams, InitConfig, LMConfig, ParamSet, PreprocessConfig
from app.echo.synth import (
    BENCHMARK_INIT,
    DEFAULT_COMPONENTS,
    SynthSpec,
    compare_skew,
    denoise_experiment,
    generate,
    psnr,
    quantize,
    random_components,
    score_denoise,
    separable_feature_set,
    skewed_corpus,
)
from app.shared.exceptions import AliasingError, ShapeError

SHORT = SynthSpec(
    components=(EchoParams(alpha=90.0, mu=5.0, sigma=0.06, eta=1.0, freq=50.0, phase=0.4),),
    n_samples=3000,
)


def test_quantize_rounds_half_away_from_zero_and_clamps():
    values = np.array([0.5, -0.5, 1.49, -1.51, 2.5, 200.0, -300.0, 0.0])

    np.testing.assert_array_equal(quantize(values), [1, -1, 1, -2, 3, 127, -128, 0])


def test_quantization_error_is_bounded():
    x = np.arange(SHORT.n_samples) / SHORT.fs_khz
    clean = eval_model(ParamSet(components=SHORT.components), x)

    quantized = quantize(clean)

    assert np.max(np.abs(quantized - clean)) <= 0.5
    assert psnr(clean, quantized) >= 20.0 * math.log10(255.0 / (0.5 * math.sqrt(x.shape[0])))


def test_psnr_closed_forms():
    reference = np.zeros(100)
    one_sample = reference.copy()
    one_sample[3] = 255.0
    spread = np.full(100, 2.55)

    assert psnr(reference, reference) == math.inf
    assert psnr(reference, one_sample) == pytest.approx(0.0)
    assert psnr(reference, spread) == pytest.approx(20.0)


def test_psnr_rejects_length_mismatch():
    with pytest.raises(ShapeError):
        psnr(np.zeros(3), np.zeros(4))


def test_generate_noiseless_float_frame_is_the_model():
    spec = SHORT.model_copy(update={"noise_sigma": 0.0, "quantize": False})

    signal = generate(spec)

    expected = eval_model(ParamSet(components=spec.components), signal.gt.x)
    np.testing.assert_array_equal(signal.gt.samples, expected)
    np.testing.assert_array_equal(signal.noisy.samples, signal.gt.samples)
    assert signal.gt.f_e == 50.0
    assert signal.gt.fs_khz == pytest.approx(300.0)


def test_generate_is_seeded():
    first = generate(SHORT)
    again = generate(SHORT)
    other = generate(SHORT.model_copy(update={"seed": 1}))

    np.testing.assert_array_equal(first.noisy.samples, again.noisy.samples)
    assert not np.array_equal(first.noisy.samples, other.noisy.samples)


def test_quantized_frames_are_integer_valued():
    signal = generate(SHORT)

    for samples in (signal.gt.samples, signal.noisy.samples):
        np.testing.assert_array_equal(samples, np.round(samples))
        assert samples.min() >= -128 and samples.max() <= 127


def test_single_loud_component_survives_quantization():
    spec = SHORT.model_copy(
        update={
            "components": (SHORT.components[0].model_copy(update={"alpha": 100.0}),),
            "noise_sigma": 0.0,
        }
    )

    samples = generate(spec).gt.samples

    assert 90 <= samples.max() <= 127


def test_overdriven_amplitudes_are_rescaled():
    spec = SHORT.model_copy(
        update={
            "components": (SHORT.components[0].model_copy(update={"alpha": 400.0}),),
            "noise_sigma": 0.0,
        }
    )

    signal = generate(spec)

    assert np.max(np.abs(signal.gt.samples)) <= 127
    assert signal.params.components[0].alpha < 400.0


def test_aliased_components_are_rejected():
    spec = SHORT.model_copy(
        update={"components": (SHORT.components[0].model_copy(update={"freq": 150.0}),)}
    )

    with pytest.raises(AliasingError):
        generate(spec)


def test_spec_needs_components():
    with pytest.raises(ValueError):
        SynthSpec(components=())


def test_default_spec_is_well_separated():
    mus = sorted(p.mu for p in DEFAULT_COMPONENTS)
    widest = max(p.sigma for p in DEFAULT_COMPONENTS)

    assert len(DEFAULT_COMPONENTS) == 4
    assert all(b - a >= 8 * widest for a, b in zip(mus, mus[1:]))
    assert mus[-1] < SynthSpec().duration
    assert all(0.9 * 50.0 <= p.freq <= 1.1 * 50.0 for p in DEFAULT_COMPONENTS)


def test_score_denoise_without_noise_has_no_gain():
    signal = generate(SHORT.model_copy(update={"noise_sigma": 0.0}))

    report = score_denoise(signal.gt, signal.noisy, signal.gt.samples)

    assert report.psnr_raw_db == math.inf
    assert report.gain_db is None


def test_noiseless_experiment_reconstructs_closely():
    spec = SHORT.model_copy(update={"noise_sigma": 0.0, "quantize": False})

    report = denoise_experiment(spec, preprocess=PreprocessConfig(bandpass=False))

    assert report.psnr_raw_db == math.inf
    assert report.psnr_fit_db >= 80.0


def test_default_benchmark_gains_thirty_decibels():
    started = time.perf_counter()
    report = denoise_experiment()
    elapsed = time.perf_counter() - started

    assert report.gain_db is not None
    assert report.gain_db >= 30.0
    assert elapsed < 10.0
    assert len(report.fit_params) == 4
    duration = SynthSpec().duration
    assert all(0.0 <= p.mu <= duration for p in report.fit_params.components)
    assert all(0.0 < p.sigma < 1.0 for p in report.fit_params.components)


def test_benchmark_detection_thresholds_the_normalized_envelope():
    assert BENCHMARK_INIT.normalize_gradient
    assert not InitConfig().normalize_gradient
    assert BENCHMARK_INIT.tau == InitConfig().tau
    assert BENCHMARK_INIT.grad_separation == InitConfig().grad_separation


def test_heavy_noise_still_reports():
    spec = SHORT.model_copy(update={"noise_sigma": 100.0})

    report = denoise_experiment(spec, lm=LMConfig(max_iterations=20))

    assert math.isfinite(report.psnr_raw_db)


def test_random_components_sit_in_their_slots():
    components = random_components(5, seed=3, duration=10.0)

    assert len(components) == 5
    for i, p in enumerate(components):
        assert 2.0 * i + 0.8 <= p.mu <= 2.0 * i + 1.2
        assert 0.03 <= p.sigma <= 0.05
        assert abs(p.eta) <= 1.5
        assert 48.0 <= p.freq <= 52.0


def test_skewed_corpus_frames():
    frames = skewed_corpus(n_frames=4, seed=1)

    assert [f.frame_index for f in frames] == [0, 1, 2, 3]
    assert all(f.n_samples == 270 and f.f_e == 50.0 for f in frames)
    assert skewed_corpus(n_frames=4, seed=1)[2].samples.tolist() == frames[2].samples.tolist()


def test_skew_model_beats_symmetric_model_on_skewed_echoes():
    frames = skewed_corpus()

    report = compare_skew(frames)

    assert report.n_frames == 21
    assert report.memg_frame_confidence > report.gaussian_frame_confidence


def test_separable_feature_set_layout():
    rows = separable_feature_set(n_frames=21)

    assert rows.n_rows == 84
    assert int(rows.labels.sum()) == 21
    objects = rows.column("mu")[rows.labels == 1]
    assert np.all((objects >= 1.0) & (objects <= 1.2))
    clutter = rows.column("mu")[rows.labels == 0]
    assert not np.any((clutter >= 1.0) & (clutter <= 1.2))

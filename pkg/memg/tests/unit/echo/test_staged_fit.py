import math

import numpy as np
import pytest

from app.echo.model import eval_model
from app.echo.models import (
    EchoParams,
    FitResult,
    Frame,
    InitConfig,
    ParamSet,
    PreprocessConfig,
    StagePlan,
    StageSpec,
)
from app.echo.optimizer import loss, within_frame
from app.echo.staged_fit import (
    detect_components,
    fit_frame,
    fit_frames,
    initial_sigma,
    peak_width_sigma,
    reconstruct,
    seed_phases,
)
from app.echo.synth import SynthSpec, generate, random_components
from app.shared.constants import (
    FRAME_SAMPLES,
    OPERATING_FREQUENCY_KHZ,
    REAL_GRAD_SEPARATION,
    REAL_TAU,
)
from app.shared.exceptions import NoComponentsError

FS_KHZ = 300.0
X = np.arange(600) / FS_KHZ
TWO_ECHOES = (
    EchoParams(alpha=80.0, mu=0.6, sigma=0.05, eta=0.8, freq=50.0, phase=0.3),
    EchoParams(alpha=50.0, mu=1.3, sigma=0.06, eta=-0.6, freq=50.0, phase=-1.0),
)


def _bump(center: float, sigma: float, amplitude: float) -> np.ndarray:
    return amplitude * np.exp(-((X - center) ** 2) / (2.0 * sigma * sigma))


def _frame(components: tuple[EchoParams, ...], n: int = 600, index: int = 0) -> Frame:
    x = np.arange(n) / FS_KHZ
    samples = eval_model(ParamSet(components=components), x)
    return Frame.from_rate(samples, FS_KHZ, frame_index=index, f_e=50.0)


def _random_frame(seed: int) -> tuple[Frame, tuple[EchoParams, ...]]:
    components = random_components(2, seed, 2.0)
    spec = SynthSpec(
        components=components, n_samples=600, noise_sigma=0.0, quantize=False, seed=seed
    )
    return generate(spec).gt, components


def _assert_recovered(fitted: EchoParams, truth: EchoParams) -> None:
    for name in ("alpha", "mu", "sigma", "eta", "freq"):
        assert getattr(fitted, name) == pytest.approx(getattr(truth, name), rel=5e-3, abs=1e-6)
    assert abs(math.remainder(fitted.phase - truth.phase, 2.0 * math.pi)) < 0.01


def test_detects_one_component_per_rising_edge():
    envelope = _bump(0.5, 0.05, 1.0) + _bump(1.4, 0.05, 0.6)

    found = detect_components(envelope, X, InitConfig(f_e=50.0))

    assert [p.mu for p in found] == pytest.approx([0.5, 1.4])
    assert [p.alpha for p in found] == pytest.approx([1.0, 0.6])
    assert all(p.eta == 0.0 and p.freq == 50.0 and p.phase == 0.0 for p in found)
    assert [p.sigma for p in found] == pytest.approx([0.05, 0.05], rel=0.02)


def test_unit_rule_starts_at_one_millisecond():
    envelope = _bump(0.5, 0.05, 1.0)

    found = detect_components(envelope, X, InitConfig(sigma_rule="unit"))

    assert [p.sigma for p in found] == [1.0]


def test_explicit_sigma_init_wins():
    envelope = _bump(0.5, 0.05, 1.0)

    found = detect_components(envelope, X, InitConfig(sigma_init=0.2))

    assert [p.sigma for p in found] == [0.2]


def test_weak_peaks_are_kept_by_default():
    envelope = _bump(0.5, 0.05, 1.0) + _bump(1.4, 0.05, 0.12)

    found = detect_components(envelope, X, InitConfig(tau=0.05))

    assert [p.mu for p in found] == pytest.approx([0.5, 1.4])


def test_relative_amplitude_floor_drops_weak_peaks():
    envelope = _bump(0.5, 0.05, 1.0) + _bump(1.4, 0.05, 0.12)

    found = detect_components(envelope, X, InitConfig(tau=0.05, min_rel_amplitude=0.15))

    assert [p.mu for p in found] == pytest.approx([0.5])


def test_detection_ignores_blind_zone():
    envelope = _bump(0.5, 0.05, 1.0) + _bump(1.4, 0.05, 0.6)

    found = detect_components(envelope, X, InitConfig(), blind_zone=300)

    assert [p.mu for p in found] == pytest.approx([1.4])


def test_close_peaks_merge_to_the_larger():
    envelope = _bump(0.8, 0.02, 0.7) + _bump(0.9, 0.02, 1.0)

    found = detect_components(envelope, X, InitConfig(grad_separation=5, min_peak_distance=40))

    assert [p.mu for p in found] == pytest.approx([0.9])


def test_gradient_threshold_defaults_to_raw_envelope_units():
    envelope = 200.0 * _bump(0.5, 0.05, 1.0)

    found = detect_components(envelope, X, InitConfig(tau=100.0))

    assert [p.mu for p in found] == pytest.approx([0.5])
    with pytest.raises(NoComponentsError):
        detect_components(envelope, X, InitConfig(tau=300.0))


def test_normalized_gradient_is_scale_free():
    quiet = _bump(0.5, 0.05, 1.0)
    loud = 200.0 * quiet
    cfg = InitConfig(tau=0.5, normalize_gradient=True)

    assert [p.mu for p in detect_components(loud, X, cfg)] == pytest.approx([0.5])
    assert [p.mu for p in detect_components(quiet, X, cfg)] == pytest.approx([0.5])
    with pytest.raises(NoComponentsError):
        detect_components(loud, X, InitConfig(tau=100.0, normalize_gradient=True))


def test_unit_stride_climbs_to_the_crest():
    x = np.arange(FRAME_SAMPLES) / 1000.0
    envelope = 3000.0 * np.exp(-((x - 0.06) ** 2) / (2.0 * 0.008**2))
    cfg = InitConfig(
        tau=REAL_TAU, grad_separation=REAL_GRAD_SEPARATION, f_e=OPERATING_FREQUENCY_KHZ
    )

    found = detect_components(envelope, x, cfg)

    assert [p.mu for p in found] == pytest.approx([0.06])
    assert found[0].alpha == pytest.approx(3000.0)
    assert found[0].sigma == pytest.approx(0.008, rel=0.05)
    assert found[0].freq == OPERATING_FREQUENCY_KHZ


def test_detection_without_edges_fails():
    with pytest.raises(NoComponentsError):
        detect_components(np.zeros_like(X), X, InitConfig())
    with pytest.raises(NoComponentsError):
        detect_components(_bump(0.5, 0.05, 1.0), X, InitConfig(tau=5.0))


def test_initial_sigma_rule():
    assert initial_sigma(X, InitConfig()) == 1.0
    short = np.arange(126) / FS_KHZ
    assert initial_sigma(short, InitConfig()) == pytest.approx(1.0 / FS_KHZ)
    assert initial_sigma(short, InitConfig(sigma_init=0.2)) == 0.2


@pytest.mark.parametrize("sigma", [0.01, 0.05, 0.2])
def test_peak_width_sigma_matches_gaussian_spread(sigma):
    envelope = _bump(1.0, sigma, 7.0)

    assert peak_width_sigma(envelope, 300, 1.0 / FS_KHZ) == pytest.approx(sigma, rel=0.02)


def test_peak_width_sigma_is_bounded():
    dt = 1.0 / FS_KHZ
    spike = np.zeros_like(X)
    spike[300] = 1.0

    assert peak_width_sigma(spike, 300, dt) == pytest.approx(dt)
    assert peak_width_sigma(np.ones_like(X), 300, dt) <= X.shape[0] * dt


def test_seed_phases_recovers_carrier_phases():
    frame = _frame(TWO_ECHOES)
    flat = ParamSet(components=tuple(p.model_copy(update={"phase": 0.0}) for p in TWO_ECHOES))

    seeded = seed_phases(flat, frame)

    assert [p.phase for p in seeded.components] == pytest.approx([0.3, -1.0], abs=1e-6)
    for before, after in zip(flat.components, seeded.components):
        assert before.model_copy(update={"phase": after.phase}) == after
    assert loss(seeded, frame) < loss(flat, frame)


def test_fit_frame_recovers_noiseless_echoes():
    frame = _frame(TWO_ECHOES)

    fit = fit_frame(frame, InitConfig())

    assert [s.name for s in fit.stages] == ["envelope", "oscillation", "joint"]
    assert fit.oscillating
    assert not fit.degraded
    assert len(fit.params) == 2
    for fitted, truth in zip(fit.params.components, TWO_ECHOES):
        _assert_recovered(fitted, truth)
    assert fit.final_loss < 1e-6 * float(frame.samples @ frame.samples)
    assert fit.frame_confidence > 1e3
    assert len(fit.component_confidences) == 2


@pytest.mark.parametrize("seed", range(20))
def test_fit_frame_recovers_random_noiseless_frames(seed):
    frame, components = _random_frame(seed)

    fit = fit_frame(frame, InitConfig())

    assert not fit.degraded
    assert len(fit.params) == 2
    for fitted, truth in zip(fit.params.components, components):
        _assert_recovered(fitted, truth)


@pytest.mark.parametrize("seed", range(20))
def test_unit_spread_start_stays_on_the_frame(seed):
    frame, _ = _random_frame(seed)

    fit = fit_frame(frame, InitConfig(sigma_rule="unit"))

    assert within_frame(fit.params, frame)
    assert all(0.0 < p.sigma <= frame.duration for p in fit.params.components)


def test_fit_left_off_the_frame_is_degraded():
    frame = _frame(TWO_ECHOES)
    stage = StageSpec(name="amplitude", free=("alpha",), oscillating=False, target="envelope")
    amplitude_only = StagePlan(stages=(stage,))

    fit = fit_frame(frame, InitConfig(sigma_init=5.0), amplitude_only)

    assert all(p.sigma == 5.0 for p in fit.params.components)
    assert fit.degraded


def test_stage_losses_never_increase():
    frame = _frame(TWO_ECHOES)

    fit = fit_frame(frame, InitConfig())

    for stage in fit.stages:
        assert stage.final_loss <= stage.start_loss
        assert stage.trace is not None


def test_stages_leave_frozen_parameters_untouched():
    frame = _frame(TWO_ECHOES)
    envelope_only = fit_frame(frame, InitConfig(), StagePlan.envelope())
    first_two = StagePlan(stages=StagePlan.memg().stages[:2])

    fit = fit_frame(frame, InitConfig(), first_two)

    for before, after in zip(envelope_only.params.components, fit.params.components):
        assert (after.alpha, after.mu, after.sigma, after.eta) == (
            before.alpha,
            before.mu,
            before.sigma,
            before.eta,
        )


def test_fit_is_translation_covariant():
    shift = 60
    moved = tuple(p.model_copy(update={"mu": p.mu + shift / FS_KHZ}) for p in TWO_ECHOES)

    base = fit_frame(_frame(TWO_ECHOES, n=700), InitConfig())
    shifted = fit_frame(_frame(moved, n=700), InitConfig())

    for a, b in zip(base.params.components, shifted.params.components):
        assert b.mu - a.mu == pytest.approx(shift / FS_KHZ, abs=1e-6)
        assert b.alpha == pytest.approx(a.alpha, rel=1e-6)
        assert b.sigma == pytest.approx(a.sigma, rel=1e-6)


def test_envelope_plan_fits_the_envelope_model():
    frame = _frame(TWO_ECHOES)

    fit = fit_frame(frame, InitConfig(), StagePlan.envelope())

    assert not fit.oscillating
    assert [s.name for s in fit.stages] == ["envelope"]
    np.testing.assert_allclose(
        reconstruct(fit, frame.x), eval_model(fit.params, frame.x, oscillating=False)
    )


def test_gaussian_plan_keeps_skew_at_zero():
    fit = fit_frame(_frame(TWO_ECHOES), InitConfig(), StagePlan.gaussian())

    assert all(p.eta == 0.0 for p in fit.params.components)


def test_operating_frequency_falls_back_to_frame_metadata():
    frame = _frame(TWO_ECHOES)

    fit = fit_frame(frame, InitConfig(), StagePlan.envelope())

    assert all(p.freq == 50.0 for p in fit.params.components)


def test_fit_with_preprocessing():
    rng = np.random.default_rng(0)
    clean = _frame(TWO_ECHOES)
    frame = clean.with_samples(clean.samples + rng.normal(0.0, 1.0, clean.n_samples))

    fit = fit_frame(frame, InitConfig(tau=10.0), preprocess=PreprocessConfig())

    assert len(fit.params) == 2
    assert [p.mu for p in fit.params.components] == pytest.approx([0.6, 1.3], abs=0.01)


def test_fit_frames_keeps_input_order_across_threads():
    frames = [_frame(TWO_ECHOES, index=i) for i in (3, 1, 2)]

    serial = fit_frames(frames, InitConfig())
    parallel = fit_frames(frames, InitConfig(), threads=3)

    assert [fit.params.frame_index for fit in parallel] == [3, 1, 2]
    assert serial == parallel


def test_reconstruct_without_components_is_zero():
    fit = FitResult(params=ParamSet())

    assert not reconstruct(fit, X).any()

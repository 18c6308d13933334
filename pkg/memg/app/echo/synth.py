"""Synthetic ground truth, quantization, PSNR scoring and benchmark drivers."""

import logging
import math
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.echo.features import FEATURE_COLUMNS, FeatureMatrix
from app.echo.model import eval_model
from app.echo.models import (
    EchoParams,
    Frame,
    InitConfig,
    LMConfig,
    ParamSet,
    PreprocessConfig,
    StagePlan,
)
from app.echo.staged_fit import fit_frame, reconstruct
from app.shared.constants import (
    NOISE_SIGMA,
    PSNR_PEAK,
    QUANT_MAX,
    QUANT_MIN,
    SAMPLING_RATE_KHZ,
)
from app.shared.exceptions import AliasingError, ApplicationError, ShapeError

logger = logging.getLogger(__name__)

CARRIER_KHZ = 50.0

DEFAULT_COMPONENTS: tuple[EchoParams, ...] = (
    EchoParams(alpha=85.0, mu=40.0, sigma=0.06, eta=1.0, freq=50.0, phase=0.4),
    EchoParams(alpha=100.0, mu=95.0, sigma=0.07, eta=-0.5, freq=49.0, phase=-1.0),
    EchoParams(alpha=60.0, mu=150.0, sigma=0.08, eta=2.0, freq=51.0, phase=1.5),
    EchoParams(alpha=40.0, mu=210.0, sigma=0.075, eta=-1.5, freq=50.5, phase=-2.2),
)

# synthetic frames threshold the max-normalized envelope and drop noise crests
BENCHMARK_INIT = InitConfig(normalize_gradient=True, min_rel_amplitude=0.25)


class SynthSpec(BaseModel):
    """Synthetic frame recipe. The default is the fixed denoising benchmark."""

    model_config = ConfigDict(frozen=True)

    components: tuple[EchoParams, ...] = DEFAULT_COMPONENTS
    fs_khz: float = Field(default=SAMPLING_RATE_KHZ, gt=0)
    n_samples: int = Field(default=75_000, ge=2)
    noise_sigma: float = Field(default=NOISE_SIGMA, ge=0)
    quantize: bool = True
    seed: int = 0
    f_e: float = Field(default=CARRIER_KHZ, gt=0)

    @field_validator("components")
    @classmethod
    def _at_least_one(cls, value: tuple[EchoParams, ...]) -> tuple[EchoParams, ...]:
        if not value:
            raise ValueError("a synthetic frame needs at least one component")
        return value

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs_khz


class SyntheticSignal(BaseModel):
    model_config = ConfigDict(frozen=True)

    gt: Frame
    noisy: Frame
    params: ParamSet


class DenoiseReport(BaseModel):
    """PSNR of the noisy input and of the reconstruction against ground truth."""

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    psnr_raw_db: float
    psnr_fit_db: float
    gain_db: float | None
    spec: SynthSpec | None = None
    fit_params: ParamSet | None = None


class SkewReport(BaseModel):
    """Mean confidences of skewed and symmetric multimodal fits."""

    model_config = ConfigDict(frozen=True)

    n_frames: int
    memg_frame_confidence: float
    gaussian_frame_confidence: float
    memg_component_confidence: float
    gaussian_component_confidence: float


def quantize(values: np.ndarray) -> np.ndarray:
    """Signed 8-bit rounding, half away from zero, clamped to [-128, 127]."""
    values = np.asarray(values, dtype=float)
    rounded = np.sign(values) * np.floor(np.abs(values) + 0.5)
    return np.clip(rounded, QUANT_MIN, QUANT_MAX)


def generate(spec: SynthSpec | None = None) -> SyntheticSignal:
    """Sample the spec's components, quantize, and add seeded white noise.

    Args:
        spec: Frame recipe; the default benchmark when None.

    Returns:
        SyntheticSignal: Ground-truth frame, noisy frame and the generating
        parameters. With quantization on, amplitudes are scaled down when the
        clean peak would exceed 127.
    """
    spec = spec or SynthSpec()
    nyquist = 0.5 * spec.fs_khz
    aliased = [p.freq for p in spec.components if abs(p.freq) >= nyquist]
    if aliased:
        raise AliasingError(f"frequencies {aliased} kHz reach Nyquist {nyquist} kHz")

    dt = 1.0 / spec.fs_khz
    x = np.arange(spec.n_samples) * dt
    params = ParamSet(components=spec.components)
    clean = eval_model(params, x)
    if spec.quantize:
        peak = float(np.max(np.abs(clean)))
        if peak > QUANT_MAX:
            scale = QUANT_MAX / peak
            params = ParamSet(
                components=tuple(
                    p.model_copy(update={"alpha": p.alpha * scale}) for p in params.components
                )
            )
            clean = clean * scale
            logger.info("synth.generate.rescaled peak=%.4g scale=%.6g", peak, scale)
        clean = quantize(clean)

    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        noisy = clean + rng.normal(0.0, spec.noise_sigma, spec.n_samples)
        if spec.quantize:
            noisy = quantize(noisy)
    else:
        noisy = clean.copy()

    gt = Frame(samples=clean, dt=dt, f_e=spec.f_e)
    return SyntheticSignal(gt=gt, noisy=gt.with_samples(noisy), params=params)


def psnr(reference: Frame | np.ndarray, signal: Frame | np.ndarray) -> float:
    """20 log10(255 / ||g - s||); identical inputs give math.inf."""
    g = reference.samples if isinstance(reference, Frame) else np.asarray(reference, float)
    s = signal.samples if isinstance(signal, Frame) else np.asarray(signal, float)
    if g.shape != s.shape:
        raise ShapeError(f"reference has {g.shape[0]} samples, signal {s.shape[0]}")
    distance = float(np.linalg.norm(g - s))
    if distance == 0.0:
        return math.inf
    return 20.0 * math.log10(PSNR_PEAK / distance)


def score_denoise(
    gt: Frame, noisy: Frame, reconstruction: np.ndarray, **extra: object
) -> DenoiseReport:
    raw = psnr(gt, noisy)
    fit = psnr(gt, reconstruction)
    gain = None if math.isinf(raw) else fit - raw
    return DenoiseReport(psnr_raw_db=raw, psnr_fit_db=fit, gain_db=gain, **extra)


def denoise_experiment(
    spec: SynthSpec | None = None,
    init: InitConfig | None = None,
    plan: StagePlan | None = None,
    lm: LMConfig | None = None,
    preprocess: PreprocessConfig | None = None,
) -> DenoiseReport:
    """Generate, fit and score one synthetic frame.

    Args:
        spec: Frame recipe.
        init: Detection settings, ``BENCHMARK_INIT`` by default.
        plan: Stage schedule.
        lm: Optimizer settings.
        preprocess: Conditioning of the noisy frame; band-pass around the
            carrier by default.

    Returns:
        DenoiseReport: PSNR before and after, their difference, the spec and
        the fitted parameters.
    """
    spec = spec or SynthSpec()
    signal = generate(spec)
    fit = fit_frame(
        signal.noisy,
        init or BENCHMARK_INIT,
        plan,
        lm,
        PreprocessConfig() if preprocess is None else preprocess,
    )
    report = score_denoise(
        signal.gt,
        signal.noisy,
        reconstruct(fit, signal.gt.x),
        spec=spec,
        fit_params=fit.params,
    )
    logger.info(
        "synth.denoise.complete raw=%.4g fit=%.4g gain=%s",
        report.psnr_raw_db,
        report.psnr_fit_db,
        report.gain_db,
    )
    return report


def random_components(
    k: int,
    seed: int,
    duration: float,
    carrier: float = CARRIER_KHZ,
    sigma_range: tuple[float, float] = (0.03, 0.05),
    max_skew: float = 1.5,
    alpha_range: tuple[float, float] = (60.0, 100.0),
) -> tuple[EchoParams, ...]:
    """Well-separated random components, one per equal slot of the frame.

    Centers sit in the middle half of each slot; frequencies stay within 4% of
    the carrier.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(seed)
    slot = duration / k
    components = []
    for i in range(k):
        components.append(
            EchoParams(
                alpha=float(rng.uniform(*alpha_range)),
                mu=float((i + rng.uniform(0.4, 0.6)) * slot),
                sigma=float(rng.uniform(*sigma_range)),
                eta=float(rng.uniform(-max_skew, max_skew)),
                freq=float(carrier * rng.uniform(0.96, 1.04)),
                phase=float(rng.uniform(-math.pi, math.pi)),
            )
        )
    return tuple(components)


def skewed_corpus(
    n_frames: int = 21, seed: int = 0, n_samples: int = 270, noise_sigma: float = 1.0
) -> list[Frame]:
    """Short noisy frames of two echoes with strong skew (1 <= |eta| <= 3)."""
    seeds = np.random.SeedSequence(seed).spawn(n_frames)
    frames = []
    for index, child in enumerate(seeds):
        rng = np.random.default_rng(child)
        base = random_components(2, int(rng.integers(2**31)), n_samples / SAMPLING_RATE_KHZ)
        components = tuple(
            p.model_copy(update={"eta": float(rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 3.0))})
            for p in base
        )
        spec = SynthSpec(
            components=components,
            n_samples=n_samples,
            noise_sigma=noise_sigma,
            quantize=False,
            seed=int(rng.integers(2**31)),
        )
        noisy = generate(spec).noisy
        frames.append(
            Frame(samples=noisy.samples, dt=noisy.dt, frame_index=index, f_e=noisy.f_e)
        )
    return frames


def _mean_defined(values: Sequence[float | None]) -> float:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else 0.0


def compare_skew(
    frames: Sequence[Frame],
    init: InitConfig | None = None,
    lm: LMConfig | None = None,
    preprocess: PreprocessConfig | None = None,
) -> SkewReport:
    """Fit every frame with and without skew and average the confidences.

    Frames on which a plan fails are left out of that plan's means. Detection
    uses ``BENCHMARK_INIT`` unless ``init`` is given.
    """
    init = init or BENCHMARK_INIT
    means: dict[str, tuple[float, float]] = {}
    for name, plan in (("memg", StagePlan.memg()), ("gaussian", StagePlan.gaussian())):
        frame_confs: list[float | None] = []
        component_confs: list[float | None] = []
        for frame in frames:
            try:
                fit = fit_frame(frame, init, plan, lm, preprocess)
            except ApplicationError as exc:
                logger.warning(
                    "synth.compare.skipped frame=%d plan=%s reason=%s",
                    frame.frame_index,
                    name,
                    exc,
                )
                continue
            frame_confs.append(fit.frame_confidence)
            component_confs.extend(fit.component_confidences)
        means[name] = (_mean_defined(frame_confs), _mean_defined(component_confs))
    return SkewReport(
        n_frames=len(frames),
        memg_frame_confidence=means["memg"][0],
        gaussian_frame_confidence=means["gaussian"][0],
        memg_component_confidence=means["memg"][1],
        gaussian_component_confidence=means["gaussian"][1],
    )


def separable_feature_set(
    n_frames: int = 21, seed: int = 0, clutter_per_frame: int = 3
) -> FeatureMatrix:
    """Labelled rows where objects and clutter differ by many standard deviations.

    Every frame holds one object row, centered in the [1.0, 1.2] ms gate, and
    ``clutter_per_frame`` clutter rows outside it.
    """
    rng = np.random.default_rng(seed)
    frames: list[int] = []
    ks: list[int] = []
    rows: list[list[float]] = []
    labels: list[int] = []
    for frame in range(n_frames):
        for k in range(clutter_per_frame + 1):
            is_object = k == 1
            if is_object:
                row = [
                    rng.normal(100.0, 5.0),
                    rng.uniform(1.0, 1.2),
                    rng.normal(0.08, 0.004),
                    rng.normal(2.0, 0.15),
                    rng.normal(CARRIER_KHZ, 0.5),
                    rng.uniform(-math.pi, math.pi),
                    rng.normal(0.5, 0.03),
                ]
            else:
                row = [
                    rng.normal(40.0, 8.0),
                    rng.uniform(0.1, 0.9) if k == 0 else rng.uniform(1.3, 2.5),
                    rng.normal(0.03, 0.004),
                    rng.normal(-1.0, 0.3),
                    rng.normal(CARRIER_KHZ, 0.5),
                    rng.uniform(-math.pi, math.pi),
                    rng.normal(0.1, 0.02),
                ]
            frames.append(frame)
            ks.append(k)
            rows.append([float(v) for v in row])
            labels.append(int(is_object))
    return FeatureMatrix(
        frames=frames,
        components=ks,
        columns=FEATURE_COLUMNS,
        values=np.array(rows),
        labels=labels,
    )

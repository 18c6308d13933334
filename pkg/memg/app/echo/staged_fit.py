"""Component detection and the staged regression schedule."""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import linalg

from app.echo.features import score_fit
from app.echo.model import eval_component, eval_model, normalize_phase
from app.echo.models import (
    EchoParams,
    FitResult,
    Frame,
    InitConfig,
    LMConfig,
    ParamSet,
    PreprocessConfig,
    StagePlan,
    StageResult,
)
from app.echo.optimizer import loss, minimize, within_frame
from app.echo.preprocess import dominant_frequency, hilbert_envelope, preprocess_frame
from app.shared.exceptions import NoComponentsError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive [start, end] index pairs of contiguous True runs."""
    padded = np.concatenate(([False], flags, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _merge_close(indices: list[int], envelope: np.ndarray, distance: int) -> list[int]:
    merged: list[int] = []
    for idx in sorted(set(indices)):
        if merged and idx - merged[-1] < distance:
            if envelope[idx] > envelope[merged[-1]]:
                merged[-1] = idx
            continue
        merged.append(idx)
    return merged


def initial_sigma(x: np.ndarray, cfg: InitConfig) -> float:
    """Unit spread: 1 ms, or one sample period on frames shorter than 1 ms."""
    if cfg.sigma_init is not None:
        return cfg.sigma_init
    dt = float(x[1] - x[0]) if x.shape[0] > 1 else 1.0
    return 1.0 if x.shape[0] * dt >= 1.0 else dt


def peak_width_sigma(envelope: np.ndarray, index: int, dt: float) -> float:
    """Gaussian spread with the same half-maximum width as the peak at ``index``.

    Crossings are interpolated linearly; a side that never falls to half the
    peak is cut at the frame edge. The result is at least one sample period
    and at most the frame duration.
    """
    n = envelope.shape[0]
    half = 0.5 * envelope[index]
    left = index
    while left > 0 and envelope[left - 1] > half:
        left -= 1
    right = index
    while right < n - 1 and envelope[right + 1] > half:
        right += 1
    lo = float(left)
    if left > 0:
        lo -= (envelope[left] - half) / (envelope[left] - envelope[left - 1])
    hi = float(right)
    if right < n - 1:
        hi += (envelope[right] - half) / (envelope[right] - envelope[right + 1])
    return float(np.clip((hi - lo) * dt / _FWHM_PER_SIGMA, dt, n * dt))


def detect_components(
    envelope: np.ndarray,
    x: np.ndarray,
    cfg: InitConfig,
    blind_zone: int = 0,
) -> list[EchoParams]:
    """Initial components from rising edges of the envelope.

    Every contiguous run of strided gradient values above ``cfg.tau`` yields one
    component, centered on the envelope maximum over the run extended by the
    stride. Short strides can stop before the crest, so the center then climbs
    to the next local maximum. The amplitude is the envelope at the center and
    the spread follows ``cfg.sigma_init`` or ``cfg.sigma_rule``.

    Args:
        envelope: Hilbert envelope of the frame.
        x: Time axis in ms.
        cfg: Detection settings; ``cfg.f_e`` seeds the frequency.
        blind_zone: Leading samples where no component may start.

    Returns:
        list[EchoParams]: Components ordered by center.
    """
    envelope = np.asarray(envelope, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if envelope.shape != x.shape:
        raise ShapeError("envelope and time axis differ in length")
    n = envelope.shape[0]
    s = cfg.grad_separation
    usable = envelope[blind_zone:]
    peak = float(usable.max()) if usable.size else 0.0
    if n <= s or not peak > 0.0:
        raise NoComponentsError("envelope has no usable energy")

    scaled = envelope / peak if cfg.normalize_gradient else envelope
    gradient = scaled[s:] - scaled[:-s]
    above = gradient > cfg.tau
    above[:blind_zone] = False

    candidates = []
    for start, end in _runs(above):
        stop = min(end + s, n - 1)
        idx = start + int(np.argmax(envelope[start : stop + 1]))
        while idx + 1 < n and envelope[idx + 1] > envelope[idx]:
            idx += 1
        if envelope[idx] >= cfg.min_rel_amplitude * peak:
            candidates.append(idx)
    centers = _merge_close(candidates, envelope, cfg.peak_distance)
    if not centers:
        raise NoComponentsError(f"no gradient above tau={cfg.tau:g}; lower the threshold")

    freq = cfg.f_e or 0.0
    if cfg.sigma_init is not None or cfg.sigma_rule == "unit":
        sigmas = [initial_sigma(x, cfg)] * len(centers)
    else:
        dt = float(x[1] - x[0])
        sigmas = [peak_width_sigma(envelope, i, dt) for i in centers]
    return [
        EchoParams(alpha=float(envelope[i]), mu=float(x[i]), sigma=sigma, eta=0.0, freq=freq)
        for i, sigma in zip(centers, sigmas)
    ]


def seed_phases(ps: ParamSet, frame: Frame) -> ParamSet:
    """Carrier phases from a joint linear fit of in-phase and quadrature templates.

    With the phase at 0 and at pi/2 a component yields templates C and Q with
    m(phi) = cos(phi) C + sin(phi) Q, so least squares over all components
    gives every phase at once. Only phases change.
    """
    if not ps.components:
        return ps
    x = frame.x
    templates = []
    for p in ps.components:
        for phase in (0.0, 0.5 * math.pi):
            templates.append(eval_component(p.model_copy(update={"phase": phase}), x))
    weights = linalg.lstsq(np.stack(templates, axis=1), frame.samples)[0].reshape(-1, 2)
    phases = [
        normalize_phase(math.atan2(b, a)) if a or b else p.phase
        for p, (a, b) in zip(ps.components, weights.tolist())
    ]
    return ParamSet(
        components=tuple(
            p.model_copy(update={"phase": phase}) for p, phase in zip(ps.components, phases)
        ),
        frame_index=ps.frame_index,
    )


def _carrier_fitted(plan: StagePlan, index: int) -> bool:
    return any(stage.oscillating for stage in plan.stages[:index])


def _resolve_init(frame: Frame, init: InitConfig) -> InitConfig:
    if init.f_e is not None:
        return init
    return init.model_copy(update={"f_e": frame.f_e or dominant_frequency(frame)})


def fit_frame(
    frame: Frame,
    init: InitConfig,
    plan: StagePlan | None = None,
    lm: LMConfig | None = None,
    preprocess: PreprocessConfig | None = None,
) -> FitResult:
    """Detect components and run the stage plan on one frame.

    Args:
        frame: Frame to fit, already conditioned unless ``preprocess`` is set.
        init: Detection settings.
        plan: Stage schedule, three-stage by default.
        lm: Optimizer settings.
        preprocess: Optional band-pass and gain conditioning applied first.

    Returns:
        FitResult: Final parameters, per-stage losses and confidences. A stage
        that cannot lower its loss keeps the previous parameters and marks the
        result degraded, as does a final center off the frame or a spread wider
        than it. The first stage fitting the carrier starts from phases seeded
        by ``seed_phases`` when they lower its loss.
    """
    plan = plan or StagePlan.memg()
    lm = lm or LMConfig()
    if preprocess is not None:
        frame = preprocess_frame(frame, preprocess)
    init = _resolve_init(frame, init)

    envelope = frame.with_samples(hilbert_envelope(frame))
    initial = detect_components(envelope.samples, frame.x, init, frame.blind_zone)
    params = ParamSet(components=tuple(initial), frame_index=frame.frame_index)
    logger.debug("fit.frame.detected frame=%d k=%d", frame.frame_index, len(params))

    stages: list[StageResult] = []
    degraded = False
    for index, stage in enumerate(plan.stages):
        target = envelope if stage.target == "envelope" else frame
        start_loss = loss(params, target, stage.oscillating)
        start = params
        if stage.oscillating and "phase" in stage.free and not _carrier_fitted(plan, index):
            seeded = seed_phases(params, target)
            if loss(seeded, target) < start_loss:
                start = seeded
        try:
            fitted, trace = minimize(start, target, lm, stage.mask, stage.oscillating)
        except NumericalError as exc:
            logger.warning(
                "fit.stage.failed frame=%d stage=%s reason=%s", frame.frame_index, stage.name, exc
            )
            degraded = True
            stages.append(
                StageResult(name=stage.name, start_loss=start_loss, final_loss=start_loss)
            )
            continue
        if trace.best_loss >= start_loss > 0.0 and len(trace.records) > 1:
            logger.warning(
                "fit.stage.stalled frame=%d stage=%s loss=%.6g",
                frame.frame_index,
                stage.name,
                start_loss,
            )
            degraded = True
        params = fitted
        stages.append(
            StageResult(
                name=stage.name, start_loss=start_loss, final_loss=trace.best_loss, trace=trace
            )
        )
        logger.debug(
            "fit.stage.complete frame=%d stage=%s start=%.6g loss=%.6g steps=%d",
            frame.frame_index,
            stage.name,
            start_loss,
            trace.best_loss,
            trace.accepted_steps,
        )

    if not within_frame(params, frame):
        logger.warning("fit.frame.out_of_bounds frame=%d", frame.frame_index)
        degraded = True
    result = FitResult(
        params=params,
        stages=tuple(stages),
        oscillating=plan.stages[-1].oscillating,
        degraded=degraded,
    )
    result = score_fit(result, frame)
    logger.info(
        "fit.frame.complete frame=%d k=%d loss=%.6g degraded=%s",
        frame.frame_index,
        len(params),
        result.final_loss,
        degraded,
    )
    return result


def fit_frames(
    frames: Sequence[Frame],
    init: InitConfig,
    plan: StagePlan | None = None,
    lm: LMConfig | None = None,
    preprocess: PreprocessConfig | None = None,
    threads: int = 1,
) -> list[FitResult]:
    """Fit independent frames, optionally in parallel; results keep input order."""
    if threads <= 1 or len(frames) <= 1:
        return [fit_frame(frame, init, plan, lm, preprocess) for frame in frames]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda frame: fit_frame(frame, init, plan, lm, preprocess), frames))


def reconstruct(fit: FitResult, x: np.ndarray) -> np.ndarray:
    """Evaluate the fitted model; a fit without components reconstructs to zeros."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if not fit.params.components:
        return np.zeros_like(x)
    return eval_model(fit.params, x, fit.oscillating)

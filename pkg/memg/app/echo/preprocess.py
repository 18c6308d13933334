"""Frame conditioning ahead of the regression.

Band-pass filtering is a zero-phase spectral mask (raised cosine around the
carrier), power-loss compensation multiplies by x**b / a, and the envelope is
the magnitude of the analytic signal.
"""

import logging

import numpy as np
from scipy import signal

from app.echo.models import Frame, GainFit, PreprocessConfig
from app.shared.exceptions import (
    InsufficientPeaksError,
    InvalidBandError,
    NoDominantFrequencyError,
    ShapeError,
)

logger = logging.getLogger(__name__)


def dominant_frequency(frame: Frame) -> float:
    """Locate the strongest spectral line of a frame.

    A Gaussian taper makes the log-magnitude around the peak parabolic, so the
    three-bin refinement is close to exact.

    Args:
        frame: Input frame with at least four samples.

    Returns:
        float: Frequency in kHz.
    """
    n = frame.n_samples
    if n < 4:
        raise ShapeError("dominant frequency needs at least 4 samples")
    taper = signal.windows.gaussian(n, std=n / 8.0, sym=False)
    magnitude = np.abs(np.fft.rfft(frame.samples * taper))
    magnitude[0] = 0.0
    peak = int(np.argmax(magnitude))
    if magnitude[peak] <= 0.0:
        raise NoDominantFrequencyError("frame has no spectral energy")
    offset = 0.0
    if 0 < peak < magnitude.shape[0] - 1:
        floor = magnitude[peak] * 1e-12
        left, centre, right = np.log(np.maximum(magnitude[peak - 1 : peak + 2], floor))
        curvature = left - 2.0 * centre + right
        if curvature < 0.0:
            offset = 0.5 * (left - right) / curvature
    return float((peak + offset) * frame.fs_khz / n)


def bandpass_mask(n: int, dt: float, center: float, rel_bandwidth: float) -> np.ndarray:
    """Raised-cosine mask over the non-negative frequency bins of an n-point frame."""
    nyquist = 0.5 / dt
    if not 0.0 < center < nyquist:
        raise InvalidBandError(f"center {center} kHz outside (0, {nyquist}) kHz")
    if not 0.0 < rel_bandwidth <= 1.0:
        raise InvalidBandError(f"relative bandwidth {rel_bandwidth} outside (0, 1]")
    width = rel_bandwidth * center
    offset = np.fft.rfftfreq(n, dt) - center
    mask = 0.5 * (1.0 + np.cos(2.0 * np.pi * offset / width))
    mask[np.abs(offset) >= 0.5 * width] = 0.0
    return mask


def bandpass(frame: Frame, center: float, rel_bandwidth: float = 1.0) -> Frame:
    """Keep the spectral content around ``center`` (kHz), zero-phase.

    Args:
        frame: Input frame.
        center: Pass-band center in kHz.
        rel_bandwidth: Full mask width as a fraction of the center.

    Returns:
        Frame: Filtered frame of the same length.
    """
    mask = bandpass_mask(frame.n_samples, frame.dt, center, rel_bandwidth)
    spectrum = np.fft.rfft(frame.samples) * mask
    return frame.with_samples(np.fft.irfft(spectrum, n=frame.n_samples))


def hilbert_envelope(frame: Frame) -> np.ndarray:
    """Magnitude of the analytic signal."""
    if frame.n_samples < 2:
        raise ShapeError("envelope needs at least 2 samples")
    return np.abs(signal.hilbert(frame.samples))


def fit_gain(envelope: np.ndarray, x: np.ndarray, blind_zone: int = 0) -> GainFit:
    """Fit a / x**b through the local maxima of an envelope.

    The fit is a straight line in log-log coordinates.

    Args:
        envelope: Non-negative envelope.
        x: Time axis in ms.
        blind_zone: Leading samples excluded from the fit.

    Returns:
        GainFit: Fitted scale and exponent.
    """
    envelope = np.asarray(envelope, dtype=float)
    x = np.asarray(x, dtype=float)
    if envelope.shape != x.shape:
        raise ShapeError("envelope and time axis differ in length")
    peaks, _ = signal.find_peaks(envelope)
    peaks = peaks[(peaks >= blind_zone) & (x[peaks] > 0.0) & (envelope[peaks] > 0.0)]
    if peaks.size < 2:
        raise InsufficientPeaksError(f"found {peaks.size} usable peaks, need 2")
    slope, intercept = np.polyfit(np.log(x[peaks]), np.log(envelope[peaks]), 1)
    gain = GainFit(a=float(np.exp(intercept)), b=float(-slope))
    logger.debug("preprocess.gain.fit peaks=%d a=%.6g b=%.6g", peaks.size, gain.a, gain.b)
    return gain


def apply_gain(frame: Frame, g: GainFit, blind_zone: int | None = None) -> Frame:
    """Multiply samples by x**b / a outside the blind zone."""
    skip = frame.blind_zone if blind_zone is None else blind_zone
    x = frame.x
    samples = frame.samples.copy()
    region = (np.arange(frame.n_samples) >= skip) & (x > 0.0)
    samples[region] *= x[region] ** g.b / g.a
    return frame.with_samples(samples)


def preprocess_frame(frame: Frame, cfg: PreprocessConfig) -> Frame:
    """Band-pass then compensate power loss according to ``cfg``."""
    if cfg.blind_zone and cfg.blind_zone != frame.blind_zone:
        frame = Frame(
            samples=frame.samples,
            dt=frame.dt,
            frame_index=frame.frame_index,
            blind_zone=cfg.blind_zone,
            f_e=frame.f_e,
        )
    if cfg.bandpass:
        center = cfg.center or frame.f_e or dominant_frequency(frame)
        frame = bandpass(frame, center, cfg.rel_bandwidth)
        logger.debug(
            "preprocess.bandpass frame=%d center=%.4g width=%.3g",
            frame.frame_index,
            center,
            cfg.rel_bandwidth,
        )
    gain = cfg.gain
    if gain is None and cfg.fit_gain:
        gain = fit_gain(hilbert_envelope(frame), frame.x, frame.blind_zone)
    if gain is not None:
        frame = apply_gain(frame, gain)
    return frame

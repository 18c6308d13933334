"""Oscillating exponentially modified Gaussian echo model.

A component is

    m(x) = alpha * N(x | mu, sigma) * S(x | eta, mu, sigma) * A(x | mu, f, phi)

with N = exp(-(x - mu)^2 / (2 sigma^2)) (no normalizing constant, alpha absorbs
scale), the skew factor S = 1 + erf(eta (x - mu) / (sigma sqrt 2)) and the
carrier A = cos(2 pi f (x - mu) + phi). Time is in milliseconds and frequency
in kilohertz. A frame model is the sum of its components.

Evaluation is restricted to |x - mu| < 39 sigma. Outside that range the
Gaussian factor underflows to exactly 0.0, so the restriction does not change
any value.
"""

import math

import numpy as np
from scipy import special

from app.echo.models import EchoParams, ParamSet
from app.shared.constants import PARAMS_PER_COMPONENT
from app.shared.exceptions import (
    DegenerateSpreadError,
    EmptyModelError,
    InvalidInputError,
    NoFreeParametersError,
    ShapeError,
)

MIN_SIGMA = 1e-9
_SUPPORT = 39.0
_TWO_PI = 2.0 * math.pi
_SQRT2 = math.sqrt(2.0)
_ERF_SLOPE = 2.0 / math.sqrt(math.pi)


def _check_axis(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if np.isnan(x).any():
        raise InvalidInputError("time axis contains NaN")
    return x


def _check_sigma(sigma: float) -> None:
    if not abs(sigma) >= MIN_SIGMA:
        raise DegenerateSpreadError(f"degenerate spread sigma={sigma!r}")


def _support(x: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    return np.flatnonzero(np.abs(x - mu) < _SUPPORT * abs(sigma))


def _component(row: np.ndarray, x: np.ndarray, oscillating: bool) -> np.ndarray:
    alpha, mu, sigma, eta, freq, phase = row
    _check_sigma(sigma)
    out = np.zeros_like(x)
    idx = _support(x, mu, sigma)
    if idx.size == 0 or alpha == 0.0:
        return out
    t = x[idx] - mu
    value = alpha * np.exp(-(t * t) / (2.0 * sigma * sigma))
    value = value * (1.0 + special.erf(eta * t / (sigma * _SQRT2)))
    if oscillating:
        value = value * np.cos(_TWO_PI * freq * t + phase)
    out[idx] = value
    return out


def _model(theta: np.ndarray, x: np.ndarray, oscillating: bool) -> np.ndarray:
    total = np.zeros_like(x)
    for row in theta:
        total += _component(row, x, oscillating)
    return total


def _component_partials(row: np.ndarray, x: np.ndarray, oscillating: bool) -> np.ndarray:
    """Analytic partials of one component, shape (X, 6)."""
    alpha, mu, sigma, eta, freq, phase = row
    _check_sigma(sigma)
    cols = np.zeros((x.shape[0], PARAMS_PER_COMPONENT))
    idx = _support(x, mu, sigma)
    if idx.size == 0:
        return cols
    t = x[idx] - mu
    gauss = np.exp(-(t * t) / (2.0 * sigma * sigma))
    u = eta * t / (sigma * _SQRT2)
    skew = 1.0 + special.erf(u)
    # exact derivative of erf, not of any approximation
    kernel = _ERF_SLOPE * np.exp(-(u * u))
    if oscillating:
        angle = _TWO_PI * freq * t + phase
        carrier = np.cos(angle)
        sine = np.sin(angle)
    else:
        carrier = np.ones_like(t)
        sine = np.zeros_like(t)

    d_gauss_mu = gauss * t / (sigma * sigma)
    d_gauss_sigma = gauss * t * t / sigma**3
    d_skew_mu = -kernel * eta / (sigma * _SQRT2)
    d_skew_sigma = -kernel * eta * t / (sigma * sigma * _SQRT2)
    d_skew_eta = kernel * t / (sigma * _SQRT2)

    cols[idx, 0] = gauss * skew * carrier
    cols[idx, 1] = alpha * (
        d_gauss_mu * skew * carrier
        + gauss * d_skew_mu * carrier
        + gauss * skew * _TWO_PI * freq * sine
    )
    cols[idx, 2] = alpha * carrier * (d_gauss_sigma * skew + gauss * d_skew_sigma)
    cols[idx, 3] = alpha * gauss * carrier * d_skew_eta
    if oscillating:
        cols[idx, 4] = -alpha * gauss * skew * sine * _TWO_PI * t
        cols[idx, 5] = -alpha * gauss * skew * sine
    return cols


def expand_mask(stage_mask: np.ndarray, n_components: int) -> np.ndarray:
    """Broadcast a per-parameter mask of length 6 (or shape (K, 6)) to (K, 6)."""
    mask = np.asarray(stage_mask, dtype=bool)
    if mask.shape == (PARAMS_PER_COMPONENT,):
        mask = np.tile(mask, (n_components, 1))
    if mask.shape != (n_components, PARAMS_PER_COMPONENT):
        raise ShapeError(
            f"stage mask shape {mask.shape} does not match {n_components} components"
        )
    return mask


def _jacobian(
    theta: np.ndarray, x: np.ndarray, active: np.ndarray, oscillating: bool
) -> np.ndarray:
    columns = [
        _component_partials(row, x, oscillating)[:, active[k]] for k, row in enumerate(theta)
    ]
    return np.concatenate(columns, axis=1)


def eval_component(p: EchoParams, x: np.ndarray, oscillating: bool = True) -> np.ndarray:
    """Evaluate one component on the time axis.

    Args:
        p: Component parameters.
        x: Time axis in ms.
        oscillating: Include the cosine carrier; the envelope-only model omits it.

    Returns:
        np.ndarray: Component values.
    """
    return _component(p.as_array(), _check_axis(x), oscillating)


def eval_model(ps: ParamSet, x: np.ndarray, oscillating: bool = True) -> np.ndarray:
    """Sum of all components, accumulated in component order."""
    if not ps.components:
        raise EmptyModelError("parameter set has no components")
    return _model(ps.as_array(), _check_axis(x), oscillating)


def jacobian(
    ps: ParamSet,
    x: np.ndarray,
    stage_mask: np.ndarray,
    oscillating: bool = True,
) -> np.ndarray:
    """Analytic Jacobian of the model with respect to the free parameters.

    Args:
        ps: Parameters at which to differentiate.
        x: Time axis in ms.
        stage_mask: Free-parameter flags, length 6 or shape (K, 6).
        oscillating: Differentiate the oscillating model.

    Returns:
        np.ndarray: Matrix of shape (X, number of free parameters), columns in
        flattened parameter order.
    """
    if not ps.components:
        raise EmptyModelError("parameter set has no components")
    active = expand_mask(stage_mask, len(ps))
    if not active.any():
        raise NoFreeParametersError("stage mask leaves no free parameter")
    return _jacobian(ps.as_array(), _check_axis(x), active, oscillating)


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    """Vectorized phase wrap into (-pi, pi]."""
    phi = np.asarray(phi, dtype=float)
    return phi - _TWO_PI * np.ceil((phi - math.pi) / _TWO_PI)


def normalize_phase(phi: float) -> float:
    """Map a phase to the equivalent angle in (-pi, pi]."""
    if not math.isfinite(phi):
        raise InvalidInputError(f"phase must be finite, got {phi!r}")
    return float(wrap_phase(np.float64(phi)))

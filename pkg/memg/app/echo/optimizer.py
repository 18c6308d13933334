"""Levenberg-Marquardt minimizer for the echo model.

Each step solves

    (Jr^T Jr + delta * D^T D) step = Jr^T f

with the residual f = y - M(p), its Jacobian Jr = -J (J the model Jacobian)
and D^T D = diag(Jr^T Jr), then moves to p - step. The damping follows the
Marquardt schedule: divided by the factor after an accepted step, multiplied
after a rejected one. The returned iterate is the lowest-loss accepted one.

A candidate that moves a center off the frame or widens a spread beyond the
frame duration counts as a rejected step, as does one whose system cannot be
solved.
"""

import logging

import numpy as np
from scipy import linalg

from app.echo.model import (
    _check_axis,
    _jacobian,
    _model,
    _support,
    expand_mask,
    wrap_phase,
)
from app.echo.models import Frame, LMConfig, LMIterate, LMTrace, ParamSet
from app.shared.exceptions import (
    DegenerateSpreadError,
    EmptyModelError,
    InvalidStartError,
    NoFreeParametersError,
    ShapeError,
    SingularSystemError,
)

logger = logging.getLogger(__name__)

_MU_COL = 1
_SIGMA_COL = 2
_PHASE_COL = 5


def _inside(theta: np.ndarray, x: np.ndarray, span: float) -> bool:
    mu = theta[:, _MU_COL]
    sigma = np.abs(theta[:, _SIGMA_COL])
    return bool(np.all((mu >= x[0]) & (mu <= x[-1]) & (sigma <= span)))


def within_frame(ps: ParamSet, frame: Frame) -> bool:
    """Every center lies on the frame and no spread exceeds the frame duration."""
    if not ps.components or frame.n_samples == 0:
        return True
    return _inside(ps.as_array(), frame.x, frame.duration)


def _support_rows(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Samples inside at least one component's support; other Jacobian rows are zero."""
    return np.unique(
        np.concatenate([_support(x, row[_MU_COL], row[_SIGMA_COL]) for row in theta])
    )


def _residual(theta: np.ndarray, frame: Frame, oscillating: bool) -> np.ndarray:
    return frame.samples - _model(theta, frame.x, oscillating)


def residual(ps: ParamSet, frame: Frame, oscillating: bool = True) -> np.ndarray:
    """Residual y - M(p) of a parameter set against a frame.

    Args:
        ps: Model parameters.
        frame: Target samples.
        oscillating: Evaluate the oscillating model.

    Returns:
        np.ndarray: Per-sample residual; the loss is its squared norm.
    """
    if frame.n_samples == 0:
        raise ShapeError("frame has no samples")
    if not ps.components:
        return frame.samples.copy()
    return _residual(ps.as_array(), frame, oscillating)


def loss(ps: ParamSet, frame: Frame, oscillating: bool = True) -> float:
    r = residual(ps, frame, oscillating)
    return float(r @ r)


def _solve_damped(normal: np.ndarray, rhs: np.ndarray, damping: float) -> np.ndarray:
    system = normal + damping * np.diag(np.diag(normal))
    try:
        step = linalg.cho_solve(linalg.cho_factor(system), rhs)
    except linalg.LinAlgError:
        step = linalg.lstsq(system, rhs)[0]
    if not np.all(np.isfinite(step)):
        raise SingularSystemError(f"damped normal equations unsolvable at damping={damping:g}")
    return step


def _apply_step(theta: np.ndarray, active: np.ndarray, step: np.ndarray) -> np.ndarray:
    candidate = theta.copy()
    candidate[active] -= step
    # sign of sigma is not identifiable in the Gaussian factor
    candidate[:, _SIGMA_COL] = np.abs(candidate[:, _SIGMA_COL])
    candidate[:, _PHASE_COL] = wrap_phase(candidate[:, _PHASE_COL])
    return candidate


def _prepare(
    ps: ParamSet, frame: Frame, stage_mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not ps.components:
        raise EmptyModelError("parameter set has no components")
    x = _check_axis(frame.x)
    if frame.n_samples == 0:
        raise ShapeError("frame has no samples")
    active = expand_mask(stage_mask, len(ps))
    if not active.any():
        raise NoFreeParametersError("stage mask leaves no free parameter")
    return ps.as_array(), active, x


def lm_step(
    ps: ParamSet,
    frame: Frame,
    damping: float,
    stage_mask: np.ndarray,
    oscillating: bool = True,
) -> tuple[ParamSet, np.ndarray]:
    """Take one damped Gauss-Newton step.

    Args:
        ps: Current parameters.
        frame: Target samples.
        damping: Positive damping value.
        stage_mask: Free-parameter flags, length 6 or shape (K, 6).
        oscillating: Fit the oscillating model.

    Returns:
        tuple[ParamSet, np.ndarray]: Candidate parameters and the solved step
        over the free parameters (candidate = current - step before wrapping).
    """
    if not damping > 0:
        raise ValueError("damping must be positive")
    theta, active, x = _prepare(ps, frame, stage_mask)
    jr = -_jacobian(theta, x, active, oscillating)
    f = _residual(theta, frame, oscillating)
    step = _solve_damped(jr.T @ jr, jr.T @ f, damping)
    candidate = _apply_step(theta, active, step)
    return ParamSet.from_array(candidate, ps.frame_index), step


def minimize(
    ps0: ParamSet,
    frame: Frame,
    cfg: LMConfig,
    stage_mask: np.ndarray,
    oscillating: bool = True,
) -> tuple[ParamSet, LMTrace]:
    """Minimize the squared residual over the free parameters.

    Args:
        ps0: Starting parameters.
        frame: Target samples.
        cfg: Optimizer settings.
        stage_mask: Free-parameter flags, length 6 or shape (K, 6).
        oscillating: Fit the oscillating model.

    Returns:
        tuple[ParamSet, LMTrace]: Best accepted iterate and the iteration trace.
    """
    theta, active, x = _prepare(ps0, frame, stage_mask)
    f = _residual(theta, frame, oscillating)
    current = float(f @ f)
    if not np.isfinite(current):
        raise InvalidStartError("loss at the starting point is not finite")

    span = frame.duration
    bounded = cfg.bounded and _inside(theta, x, span)
    if cfg.bounded and not bounded:
        logger.debug("lm.minimize.unbounded frame=%d", ps0.frame_index)

    damping = cfg.damping_init
    records = [LMIterate(iteration=0, loss=current, damping=damping, accepted=True)]
    best_iteration = 0
    stalled = 0
    out_of_bounds = 0
    normal = gradient = None
    reason = "max_iterations"

    for iteration in range(1, cfg.max_iterations + 1):
        if current == 0.0:
            reason = "exact"
            break
        if normal is None or gradient is None:
            rows = _support_rows(theta, x)
            jr = -_jacobian(theta, x[rows], active, oscillating)
            gradient = jr.T @ f[rows]
            if np.max(np.abs(gradient)) < cfg.grad_tol:
                reason = "grad_tol"
                break
            normal = jr.T @ jr

        candidate_loss = np.inf
        try:
            step = _solve_damped(normal, gradient, damping)
            candidate = _apply_step(theta, active, step)
            if bounded and not _inside(candidate, x, span):
                out_of_bounds += 1
            else:
                candidate_f = _residual(candidate, frame, oscillating)
                candidate_loss = float(candidate_f @ candidate_f)
        except (SingularSystemError, DegenerateSpreadError):
            pass

        if np.isfinite(candidate_loss) and candidate_loss < current:
            relative = (current - candidate_loss) / current
            theta, f, current = candidate, candidate_f, candidate_loss
            normal = gradient = None
            damping /= cfg.damping_factor
            records.append(
                LMIterate(iteration=iteration, loss=current, damping=damping, accepted=True)
            )
            best_iteration = len(records) - 1
            stalled = stalled + 1 if relative < cfg.loss_tol else 0
            if stalled >= cfg.stall_steps:
                reason = "loss_tol"
                break
        else:
            damping *= cfg.damping_factor
            records.append(
                LMIterate(
                    iteration=iteration, loss=candidate_loss, damping=damping, accepted=False
                )
            )
            if damping > cfg.max_damping:
                reason = "max_damping"
                break

    trace = LMTrace(
        records=tuple(records),
        best_iteration=best_iteration,
        stop_reason=reason,
        out_of_bounds=out_of_bounds,
    )
    logger.debug(
        "lm.minimize.done frame=%d iterations=%d accepted=%d loss=%.6g reason=%s "
        "out_of_bounds=%d",
        ps0.frame_index,
        len(records) - 1,
        trace.accepted_steps,
        current,
        reason,
        out_of_bounds,
    )
    return ParamSet.from_array(theta, ps0.frame_index), trace

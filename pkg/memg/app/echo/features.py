"""Confidence scores and classification-ready feature tables."""

import logging
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.echo.model import eval_component, eval_model
from app.echo.models import FitResult, Frame, ParamSet
from app.echo.preprocess import hilbert_envelope
from app.shared.constants import CONFIDENCE_EPSILON, PARAM_NAMES
from app.shared.exceptions import (
    ApplicationError,
    DegenerateFeatureError,
    ShapeError,
    UndefinedConfidenceError,
    WindowError,
)

logger = logging.getLogger(__name__)

FEATURE_COLUMNS: tuple[str, ...] = PARAM_NAMES + ("conf",)
CLASSIFIER_COLUMNS: tuple[str, ...] = ("sigma", "eta", "conf")
WINDOW_SIGMAS = 5.0


def _fit_target(fit: FitResult, frame: Frame) -> np.ndarray:
    return frame.samples if fit.oscillating else hilbert_envelope(frame)


def _inverse_norm(difference: np.ndarray) -> float:
    return 1.0 / max(float(np.linalg.norm(difference)), CONFIDENCE_EPSILON)


def frame_confidence(fit: FitResult, frame: Frame) -> float:
    """Inverse distance between max-normalized model and data; larger is better.

    Args:
        fit: Fitted frame.
        frame: The frame the fit targeted.

    Returns:
        float: Confidence, capped at 1 / 1e-12.
    """
    target = _fit_target(fit, frame)
    peak = float(np.max(target)) if target.size else 0.0
    if not peak > 0.0:
        raise UndefinedConfidenceError(f"frame {frame.frame_index} has no positive maximum")
    if fit.params.components:
        model = eval_model(fit.params, frame.x, fit.oscillating)
    else:
        model = np.zeros_like(target)
    return _inverse_norm(model / peak - target / peak)


def component_confidence(fit: FitResult, frame: Frame, k: int) -> float:
    """Inverse residual norm of component k within mu +/- 5 sigma."""
    p = fit.params.components[k]
    x = frame.x
    half = WINDOW_SIGMAS * abs(p.sigma)
    idx = np.flatnonzero((x >= p.mu - half) & (x <= p.mu + half))
    if idx.size == 0:
        raise WindowError(f"component {k} window does not overlap frame {frame.frame_index}")
    fitted = eval_component(p, x[idx], fit.oscillating)
    return _inverse_norm(fitted - _fit_target(fit, frame)[idx])


def score_fit(fit: FitResult, frame: Frame) -> FitResult:
    """Attach frame and component confidences to a fit.

    Confidences that are undefined for this frame are left as None.
    """
    try:
        frame_conf: float | None = frame_confidence(fit, frame)
    except ApplicationError as exc:
        logger.warning("features.confidence.skipped frame=%d reason=%s", frame.frame_index, exc)
        frame_conf = None
    component_confs: list[float | None] = []
    for k in range(len(fit.params)):
        try:
            component_confs.append(component_confidence(fit, frame, k))
        except ApplicationError as exc:
            logger.warning(
                "features.confidence.skipped frame=%d k=%d reason=%s", frame.frame_index, k, exc
            )
            component_confs.append(None)
    return fit.model_copy(
        update={
            "frame_confidence": frame_conf,
            "component_confidences": tuple(component_confs),
        }
    )


def reject_outliers(ps: ParamSet, x_end: float | None = None) -> tuple[ParamSet, list[int]]:
    """Drop components with negative center or spread, or centered past ``x_end``.

    Args:
        ps: Fitted parameters.
        x_end: Frame end in ms, or None to skip the range check.

    Returns:
        tuple[ParamSet, list[int]]: Survivors in original order and the
        rejected component indices.
    """
    kept = []
    rejected = []
    for k, p in enumerate(ps.components):
        if p.mu < 0 or p.sigma < 0 or (x_end is not None and p.mu > x_end):
            rejected.append(k)
        else:
            kept.append(p)
    return ParamSet(components=tuple(kept), frame_index=ps.frame_index), rejected


class StandardScale(BaseModel):
    """Column means and sample standard deviations of a training partition."""

    model_config = ConfigDict(frozen=True)

    columns: tuple[str, ...]
    mean: tuple[float, ...]
    std: tuple[float, ...]


class FeatureMatrix(BaseModel):
    """One row per retained component (frame, k) with optional labels."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frames: np.ndarray
    components: np.ndarray
    columns: tuple[str, ...] = FEATURE_COLUMNS
    values: np.ndarray
    labels: np.ndarray | None = None
    scale: StandardScale | None = None

    @field_validator("frames", "components", mode="before")
    @classmethod
    def _as_index(cls, value: object) -> np.ndarray:
        return np.asarray(value, dtype=int).reshape(-1)

    @field_validator("values", mode="before")
    @classmethod
    def _as_table(cls, value: object) -> np.ndarray:
        table = np.asarray(value, dtype=float)
        return table if table.ndim == 2 else table.reshape(-1, 1)

    @field_validator("labels", mode="before")
    @classmethod
    def _as_labels(cls, value: object) -> np.ndarray | None:
        if value is None:
            return None
        return np.asarray(value, dtype=int).reshape(-1)

    @property
    def n_rows(self) -> int:
        return int(self.frames.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        """Restrict to the named columns, in the given order."""
        missing = [name for name in columns if name not in self.columns]
        if missing:
            raise ShapeError(f"unknown feature columns: {missing}")
        idx = [self.columns.index(name) for name in columns]
        return self.model_copy(
            update={"columns": tuple(columns), "values": self.values[:, idx], "scale": None}
        )

    def take(self, rows: np.ndarray) -> "FeatureMatrix":
        """Subset rows by index or boolean mask."""
        return self.model_copy(
            update={
                "frames": self.frames[rows],
                "components": self.components[rows],
                "values": self.values[rows],
                "labels": None if self.labels is None else self.labels[rows],
            }
        )


def build_feature_matrix(
    fits: Sequence[FitResult],
    frames: Sequence[Frame],
    gate: tuple[float, float] | None = None,
) -> FeatureMatrix:
    """Tabulate retained components of fitted frames.

    Args:
        fits: Fit results, one per frame.
        frames: The frames the fits targeted, in the same order.
        gate: Reflector window [start, end] in ms. Components centered inside
            are labelled 1 (object), others 0 (clutter). None leaves rows
            unlabelled.

    Returns:
        FeatureMatrix: Feature rows with columns alpha..phase, conf.
    """
    if len(fits) != len(frames):
        raise ShapeError("fits and frames differ in length")
    frame_ids: list[int] = []
    k_ids: list[int] = []
    rows: list[list[float]] = []
    labels: list[int] = []
    for fit, frame in zip(fits, frames):
        _, rejected = reject_outliers(fit.params, frame.duration)
        for k, p in enumerate(fit.params.components):
            if k in rejected:
                continue
            try:
                conf = component_confidence(fit, frame, k)
            except WindowError:
                logger.warning("features.row.skipped frame=%d k=%d", frame.frame_index, k)
                continue
            frame_ids.append(frame.frame_index)
            k_ids.append(k)
            rows.append([*p.as_array().tolist(), conf])
            if gate is not None:
                labels.append(int(gate[0] <= p.mu <= gate[1]))
    return FeatureMatrix(
        frames=frame_ids,
        components=k_ids,
        values=np.array(rows, dtype=float).reshape(len(rows), len(FEATURE_COLUMNS)),
        labels=labels if gate is not None else None,
    )


def fit_scale(features: FeatureMatrix) -> StandardScale:
    """Column statistics with the n-1 denominator."""
    if features.n_rows < 2:
        raise DegenerateFeatureError("standardization needs at least 2 rows")
    mean = features.values.mean(axis=0)
    std = features.values.std(axis=0, ddof=1)
    flat = [name for name, s in zip(features.columns, std) if not s > 0]
    if flat:
        raise DegenerateFeatureError(f"zero-spread feature columns: {flat}")
    return StandardScale(
        columns=features.columns, mean=tuple(mean.tolist()), std=tuple(std.tolist())
    )


def standardize(features: FeatureMatrix, scale: StandardScale | None = None) -> FeatureMatrix:
    """Apply (x - mu_s) / sigma_s column-wise.

    Args:
        features: Rows to standardize.
        scale: Training statistics; computed from ``features`` when None.

    Returns:
        FeatureMatrix: Standardized rows carrying the statistics used.
    """
    scale = scale or fit_scale(features)
    if scale.columns != features.columns:
        raise ShapeError(f"scale columns {scale.columns} differ from {features.columns}")
    values = (features.values - np.array(scale.mean)) / np.array(scale.std)
    return features.model_copy(update={"values": values, "scale": scale})

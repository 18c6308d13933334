from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.shared.constants import (
    MAX_LM_ITERATIONS,
    PARAM_NAMES,
    PARAMS_PER_COMPONENT,
    SYNTH_GRAD_SEPARATION,
    SYNTH_TAU,
)


def _readonly(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


class EchoParams(BaseModel):
    """One echo component: amplitude, center (ms), spread (ms), skew,
    carrier frequency (kHz) and phase (rad)."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    mu: float
    sigma: float
    eta: float = 0.0
    freq: float = 0.0
    phase: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "EchoParams":
        return cls(**{name: float(value) for name, value in zip(PARAM_NAMES, values)})


class ParamSet(BaseModel):
    """Ordered components fitted to one frame. Index k is an identity."""

    model_config = ConfigDict(frozen=True)

    components: tuple[EchoParams, ...] = ()
    frame_index: int = 0

    def __len__(self) -> int:
        return len(self.components)

    @property
    def valid(self) -> bool:
        """True when every component has positive spread and non-negative center."""
        return all(p.sigma > 0 and p.mu >= 0 for p in self.components)

    def as_array(self) -> np.ndarray:
        """Return the (K, 6) parameter matrix."""
        if not self.components:
            return np.zeros((0, PARAMS_PER_COMPONENT))
        return np.stack([p.as_array() for p in self.components])

    def flatten(self) -> np.ndarray:
        """Return the concatenated parameter vector of length 6K."""
        return self.as_array().reshape(-1)

    @classmethod
    def from_array(cls, values: np.ndarray, frame_index: int = 0) -> "ParamSet":
        rows = np.asarray(values, dtype=float).reshape(-1, PARAMS_PER_COMPONENT)
        return cls(
            components=tuple(EchoParams.from_array(row) for row in rows),
            frame_index=frame_index,
        )


class Frame(BaseModel):
    """One A-scan sampled on x_i = i * dt (ms)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    dt: float = Field(gt=0)
    frame_index: int = 0
    blind_zone: int = Field(default=0, ge=0)
    f_e: float | None = None

    @field_validator("samples", mode="before")
    @classmethod
    def _as_vector(cls, value: object) -> np.ndarray:
        samples = np.array(value, dtype=float).reshape(-1)
        return _readonly(samples)

    @classmethod
    def from_rate(cls, samples: object, fs_khz: float, **kwargs: object) -> "Frame":
        return cls(samples=samples, dt=1.0 / fs_khz, **kwargs)

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def fs_khz(self) -> float:
        return 1.0 / self.dt

    @property
    def duration(self) -> float:
        return self.n_samples * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def with_samples(self, samples: np.ndarray) -> "Frame":
        """Return a frame sharing this frame's metadata with new samples."""
        return Frame(
            samples=samples,
            dt=self.dt,
            frame_index=self.frame_index,
            blind_zone=self.blind_zone,
            f_e=self.f_e,
        )


class LMConfig(BaseModel):
    """Damped least-squares settings."""

    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(default=MAX_LM_ITERATIONS, ge=1)
    damping_init: float = Field(default=1e-2, gt=0)
    damping_factor: float = Field(default=10.0, gt=1)
    max_damping: float = Field(default=1e12, gt=0)
    loss_tol: float = Field(default=1e-10, ge=0)
    grad_tol: float = Field(default=1e-10, ge=0)
    stall_steps: int = Field(default=3, ge=1)
    # candidates with a center off the frame or a spread wider than it are rejected
    bounded: bool = True


class LMIterate(BaseModel):
    """One optimizer record; damping is the value in effect after this iterate."""

    model_config = ConfigDict(frozen=True)

    iteration: int
    loss: float
    damping: float
    accepted: bool


class LMTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    records: tuple[LMIterate, ...]
    best_iteration: int = 0
    stop_reason: str = "max_iterations"
    out_of_bounds: int = 0

    @property
    def best_loss(self) -> float:
        return self.records[self.best_iteration].loss

    @property
    def accepted_losses(self) -> list[float]:
        return [record.loss for record in self.records if record.accepted]

    @property
    def accepted_steps(self) -> int:
        """Accepted steps, not counting the starting point."""
        return sum(1 for record in self.records[1:] if record.accepted)


SigmaRule = Literal["width", "unit"]


class InitConfig(BaseModel):
    """Component detection settings.

    ``tau`` is in raw envelope units per ``grad_separation`` samples unless
    ``normalize_gradient`` divides the envelope by its maximum first. Spreads
    start at ``sigma_init`` when set, else from the half-maximum width of each
    detected peak (``"width"``) or from the 1 ms / one-sample rule (``"unit"``).
    """

    model_config = ConfigDict(frozen=True)

    tau: float = Field(default=SYNTH_TAU, gt=0)
    grad_separation: int = Field(default=SYNTH_GRAD_SEPARATION, ge=1)
    min_peak_distance: int | None = Field(default=None, ge=0)
    f_e: float | None = Field(default=None, gt=0)
    sigma_init: float | None = Field(default=None, gt=0)
    sigma_rule: SigmaRule = "width"
    normalize_gradient: bool = False
    min_rel_amplitude: float = Field(default=0.0, ge=0, lt=1)

    @property
    def peak_distance(self) -> int:
        if self.min_peak_distance is None:
            return 2 * self.grad_separation
        return self.min_peak_distance


Target = Literal["envelope", "signal"]


class StageSpec(BaseModel):
    """One regression stage: which parameters move, against which signal."""

    model_config = ConfigDict(frozen=True)

    name: str
    free: tuple[str, ...]
    oscillating: bool
    target: Target

    @field_validator("free")
    @classmethod
    def _known_names(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        unknown = set(value) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        return value

    @property
    def mask(self) -> np.ndarray:
        return np.array([name in self.free for name in PARAM_NAMES])


class StagePlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    stages: tuple[StageSpec, ...]

    @model_validator(mode="after")
    def _non_empty(self) -> "StagePlan":
        if not self.stages:
            raise ValueError("a stage plan needs at least one stage")
        return self

    @classmethod
    def memg(cls) -> "StagePlan":
        """Envelope regression, then oscillation, then a joint refinement."""
        return cls(
            stages=(
                StageSpec(
                    name="envelope",
                    free=("alpha", "mu", "sigma", "eta"),
                    oscillating=False,
                    target="envelope",
                ),
                StageSpec(
                    name="oscillation",
                    free=("freq", "phase"),
                    oscillating=True,
                    target="signal",
                ),
                StageSpec(name="joint", free=PARAM_NAMES, oscillating=True, target="signal"),
            )
        )

    @classmethod
    def envelope(cls) -> "StagePlan":
        """Envelope-only regression; frequency and phase are ignored."""
        return cls(stages=cls.memg().stages[:1])

    @classmethod
    def gaussian(cls) -> "StagePlan":
        """Symmetric multimodal Gaussian: the skew stays at zero throughout."""
        return cls(
            stages=tuple(
                stage.model_copy(update={"free": tuple(n for n in stage.free if n != "eta")})
                for stage in cls.memg().stages
            )
        )

    @classmethod
    def by_name(cls, name: str) -> "StagePlan":
        factories = {"memg": cls.memg, "envelope": cls.envelope, "gaussian": cls.gaussian}
        if name not in factories:
            raise ValueError(f"unknown plan: {name}")
        return factories[name]()


class StageResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    start_loss: float
    final_loss: float
    trace: LMTrace | None = None


class FitResult(BaseModel):
    """Optimized parameters of one frame with per-stage losses and confidences."""

    model_config = ConfigDict(frozen=True)

    params: ParamSet
    stages: tuple[StageResult, ...] = ()
    oscillating: bool = True
    degraded: bool = False
    frame_confidence: float | None = None
    component_confidences: tuple[float | None, ...] = ()

    @property
    def final_loss(self) -> float | None:
        return self.stages[-1].final_loss if self.stages else None


class GainFit(BaseModel):
    """Power-loss model a / x**b over the time axis."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float


class PreprocessConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    bandpass: bool = True
    rel_bandwidth: float = Field(default=1.0, gt=0, le=1)
    center: float | None = Field(default=None, gt=0)
    gain: GainFit | None = None
    fit_gain: bool = False
    blind_zone: int = Field(default=0, ge=0)

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from app.shared.constants import MAX_LM_ITERATIONS, SYNTH_GRAD_SEPARATION, SYNTH_TAU


class FitRequest(BaseModel):
    """One frame to fit, with detection and optimizer settings."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "examples": [
                {
                    "samples": [0.0, 1.5, 4.2, 1.1, -3.0, -0.4, 0.0],
                    "fs_khz": 300.0,
                    "f_e_khz": 50.0,
                    "tau": 0.1,
                    "grad_separation": 1,
                    "plan": "memg",
                }
            ]
        },
    )

    samples: list[float] = Field(min_length=2, description="Frame amplitudes.")
    fs_khz: float = Field(gt=0, description="Sampling rate in kHz.")
    frame_index: int = Field(default=0, description="Identifier echoed in the response.")
    f_e_khz: float | None = Field(
        default=None, gt=0, description="Operating frequency; estimated when omitted."
    )
    tau: float = Field(default=SYNTH_TAU, gt=0, description="Gradient threshold.")
    grad_separation: int = Field(
        default=SYNTH_GRAD_SEPARATION, ge=1, description="Gradient stride in samples."
    )
    plan: Literal["memg", "envelope", "gaussian"] = Field(
        default="memg", description="Stage schedule."
    )
    normalize_gradient: bool = Field(
        default=False, description="Threshold the max-normalized envelope instead of raw units."
    )
    min_rel_amplitude: float = Field(
        default=0.0, ge=0, lt=1, description="Drop detections below this fraction of the peak."
    )
    sigma_init: float | None = Field(
        default=None, gt=0, description="Initial spread in ms; the peak width when omitted."
    )
    max_iterations: int = Field(default=MAX_LM_ITERATIONS, ge=1, description="Per stage.")
    bandpass: bool = Field(default=True, description="Band-pass around the carrier first.")


class ComponentResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    mu: float
    sigma: float
    eta: float
    freq: float
    phase: float
    confidence: float | None = None


class StageResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    start_loss: float
    final_loss: float


class FitResponse(BaseModel):
    """Fitted components with confidences, stage losses and the reconstruction."""

    model_config = ConfigDict(frozen=True)

    frame_index: int
    components: list[ComponentResponse]
    frame_confidence: float | None = None
    degraded: bool = False
    stages: list[StageResponse] = Field(default_factory=list)
    reconstruction: list[float] = Field(default_factory=list)

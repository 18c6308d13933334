from pydantic import BaseModel, ConfigDict

PARAMS_SCHEMA_VERSION = 1


class ComponentDoc(BaseModel):
    """Stored component: the six model parameters and its confidence."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    mu: float
    sigma: float
    eta: float
    freq: float
    phase: float
    confidence: float | None = None


class StageDoc(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    start_loss: float
    final_loss: float


class FrameFitDoc(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_index: int
    oscillating: bool = True
    degraded: bool = False
    frame_confidence: float | None = None
    components: list[ComponentDoc] = []
    stages: list[StageDoc] = []


class ParamsDoc(BaseModel):
    """Versioned document holding the fits of a batch of frames."""

    model_config = ConfigDict(frozen=True)

    schema_version: int
    frames: list[FrameFitDoc] = []

from pydantic import BaseModel, ConfigDict, Field

FRAME_SCHEMA_VERSION = 1


class FrameMetaDoc(BaseModel):
    """Sidecar metadata stored next to a frame CSV."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: int
    fs_khz: float = Field(gt=0)
    frame_index: int
    blind_zone_samples: int = Field(default=0, ge=0)
    f_e_khz: float | None = None

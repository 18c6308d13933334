from pydantic import BaseModel, ConfigDict, Field


class HealthResponse(BaseModel):
    """Health check response payload."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"examples": [{"status": "ok", "version": "0.1.0"}]},
    )

    status: str = Field(description="Always `ok` while the process serves requests.")
    version: str = Field(description="Installed package version.")

from pydantic import BaseModel, ConfigDict

from app.echo.features import StandardScale
from app.echo.forest import TrainedForest

FOREST_SCHEMA_VERSION = 1


class ForestDoc(BaseModel):
    """Versioned trained forest with the standardization it was trained under."""

    model_config = ConfigDict(frozen=True)

    schema_version: int
    forest: TrainedForest
    scale: StandardScale | None = None

from fastapi import APIRouter, Depends

from app.core.config import AppConfig
from app.core.dependencies import get_app_config
from app.features.fit.schemas import FitRequest, FitResponse
from app.features.fit.service import FitService

router = APIRouter()


@router.post(
    "/fit",
    response_model=FitResponse,
    tags=["Fit"],
    summary="Fit one frame",
    description="Detects echoes in a frame and fits them with the staged regression.",
    response_description="Fitted components, stage losses and reconstruction.",
)
def fit(request: FitRequest, app_config: AppConfig = Depends(get_app_config)) -> FitResponse:
    """Fit the submitted frame.

    Runs in the worker thread pool since the regression is CPU bound.
    """
    return FitService(app_config).fit(request)

from fastapi import APIRouter, Depends

from app.core.config import AppConfig
from app.core.dependencies import get_app_config
from app.features.denoise.schemas import DenoiseRequest, DenoiseResponse
from app.features.denoise.service import DenoiseService

router = APIRouter()


@router.post(
    "/denoise",
    response_model=DenoiseResponse,
    tags=["Denoise"],
    summary="Run the synthetic denoising benchmark",
    description="Generates a synthetic frame, fits it and scores the reconstruction by PSNR.",
    response_description="PSNR before and after fitting.",
)
def denoise(
    request: DenoiseRequest, app_config: AppConfig = Depends(get_app_config)
) -> DenoiseResponse:
    return DenoiseService(app_config).run(request)

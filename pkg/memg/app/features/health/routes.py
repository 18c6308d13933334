from importlib import metadata

from fastapi import APIRouter

from app.features.health.schemas import HealthResponse

router = APIRouter()


def _package_version() -> str:
    try:
        return metadata.version("memg-echo")
    except metadata.PackageNotFoundError:
        return "unknown"


@router.get(
    "/health",
    response_model=HealthResponse,
    tags=["Health"],
    summary="Health check",
    description="Lightweight readiness endpoint.",
    response_description="Service health status.",
)
def health() -> HealthResponse:
    """Return service health status."""
    return HealthResponse(status="ok", version=_package_version())

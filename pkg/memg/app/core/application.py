import logging
import logging.config
from contextlib import asynccontextmanager
from typing import Any, AsyncIterator

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from app.core.bootstrap_logging import log_app_configuration
from app.core.config import AppConfig, Settings
from app.core.logging_config import build_logging_config
from app.core.middleware import RequestIdMiddleware
from app.core.request_id import trace_id_for
from app.features.denoise import routes as denoise_api
from app.features.fit import routes as fit_api
from app.features.health import routes as health_api
from app.shared.exceptions import ApplicationError, UsageError

logger = logging.getLogger(__name__)


def _error_response(
    request: Request, status_code: int, message: str, error_type: str, code: str
) -> JSONResponse:
    return JSONResponse(
        status_code=status_code,
        content={
            "error": {"message": message, "type": error_type, "code": code},
            "detail": message,
            "trace_id": trace_id_for(request),
        },
    )


async def unhandled_exception_handler(request: Request, exc: Exception) -> JSONResponse:
    """Handle uncaught exceptions with a JSON error response.

    Args:
        request: Incoming request.
        exc: Raised exception instance.

    Returns:
        JSONResponse: Error response with HTTP 500.
    """
    logger.exception("api.error.unhandled path=%s", request.url.path)
    return _error_response(
        request, 500, "Internal Server Error", "internal_error", "internal_error"
    )


async def http_exception_handler(request: Request, exc: HTTPException) -> JSONResponse:
    logger.warning("api.error.http path=%s status=%d", request.url.path, exc.status_code)
    return _error_response(
        request, exc.status_code, str(exc.detail), "http_error", str(exc.status_code)
    )


async def application_error_handler(request: Request, exc: ApplicationError) -> JSONResponse:
    """Map pipeline errors to 422 for bad arguments and 400 otherwise."""
    status_code = 422 if isinstance(exc, UsageError) else 400
    logger.warning(
        "api.error.application path=%s type=%s reason=%s",
        request.url.path,
        type(exc).__name__,
        exc,
    )
    return _error_response(request, status_code, str(exc), exc.error_type, type(exc).__name__)


async def validation_error_handler(request: Request, exc: ValidationError) -> JSONResponse:
    """Configuration built from a valid request can still violate model invariants."""
    message = "; ".join(error["msg"] for error in exc.errors())
    logger.warning("api.error.validation path=%s reason=%s", request.url.path, message)
    return _error_response(request, 422, message, "usage_error", "ValidationError")


@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncIterator[None]:
    """Application startup and shutdown lifecycle handler.

    Args:
        app: FastAPI application instance.

    Yields:
        None: Control back to the application runtime.
    """
    logger.info("<*> Application startup begin")
    log_app_configuration(app.state.app_config)
    try:
        yield
    finally:
        logger.info("<*> Application shutdown complete")


def create_app(app_config: AppConfig | None = None) -> FastAPI:
    """Create and configure the FastAPI application.

    Args:
        app_config: Resolved configuration; read from the environment when None.

    Returns:
        FastAPI: Configured application instance.
    """
    app_config = app_config or Settings().to_app_config()
    logging.config.dictConfig(
        build_logging_config(
            log_level=app_config.log_level.value, log_format=app_config.log_format.value
        )
    )

    app = FastAPI(title="memg-echo", lifespan=lifespan)
    app.state.app_config = app_config
    if app_config.cors_allowed_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=app_config.cors_allowed_origins,
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )
    app.add_middleware(RequestIdMiddleware)
    app.add_exception_handler(HTTPException, http_exception_handler)
    app.add_exception_handler(ApplicationError, application_error_handler)
    app.add_exception_handler(ValidationError, validation_error_handler)
    app.add_exception_handler(Exception, unhandled_exception_handler)

    common_error_responses: dict[int | str, dict[str, Any]] = {
        400: {"description": "The frame could not be fitted."},
        422: {"description": "Invalid arguments."},
        500: {"description": "Unexpected server error."},
    }

    # ===== routers =====
    app.include_router(fit_api.router, prefix="/api", responses=common_error_responses)
    app.include_router(denoise_api.router, prefix="/api", responses=common_error_responses)
    app.include_router(health_api.router)

    return app

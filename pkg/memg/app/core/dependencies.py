from typing import cast

from fastapi import Request

from app.core.config import AppConfig


def get_app_config(request: Request) -> AppConfig:
    """Resolve the application configuration from app state.

    Args:
        request: Incoming request.

    Returns:
        AppConfig: Application configuration.
    """
    return cast(AppConfig, request.app.state.app_config)

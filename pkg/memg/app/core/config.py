"""Application configuration and settings.

This module parses environment variables (including `.env` files) using
pydantic-settings and converts them into validated, strongly-typed
configuration objects shared by the command-line driver and the HTTP API.

Priority order (highest → lowest):
1. OS environment variables (``MEMG_`` prefix)
2. .env.<MEMG_APP_ENV>
3. .env
"""

import os
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class LogLevelEnum(str, Enum):
    """Log level enum for application logging."""

    critical = "CRITICAL"
    error = "ERROR"
    warning = "WARNING"
    info = "INFO"
    debug = "DEBUG"


class LogFormat(str, Enum):
    """Log format enum for application logging."""

    json = "json"
    text = "text"


def _default_threads() -> int:
    return os.cpu_count() or 1


class AppConfig(BaseModel):
    """Resolved application configuration values."""

    model_config = ConfigDict(frozen=True)

    log_level: LogLevelEnum = LogLevelEnum.info
    log_format: LogFormat = LogFormat.text
    app_env: str = "local"

    # Frame-level parallelism of batch fits
    threads: int = Field(default=1, ge=1)

    # HTTP API
    api_max_samples: int = 200_000
    cors_allowed_origins: list[str] = Field(default_factory=list)


class Settings(BaseSettings):
    """Settings loader and validators for environment configuration."""

    _env_name = (os.getenv("MEMG_APP_ENV") or "").strip()
    if _env_name:
        _env_file = (".env", f".env.{_env_name}")
    else:
        _env_file = (".env",)

    model_config = SettingsConfigDict(
        env_prefix="MEMG_",
        env_file=_env_file,
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: LogLevelEnum = LogLevelEnum.info
    log_format: LogFormat = LogFormat.text
    app_env: str = "local"

    threads: int = Field(default_factory=_default_threads)

    api_max_samples: int = 200_000
    cors_allowed_origins: str = ""

    @property
    def cors_allowed_origins_list(self) -> list[str]:
        """Parse allowed CORS origins into a list.

        Returns:
            list[str]: Origins.
        """
        return [v.strip() for v in self.cors_allowed_origins.split(",") if v.strip()]

    @model_validator(mode="after")
    def validate_limits(self) -> "Settings":
        """Validate parallelism and request size limits.

        Returns:
            Settings: Validated settings.
        """
        if self.threads <= 0:
            raise ValueError("MEMG_THREADS must be > 0")
        if self.api_max_samples <= 0:
            raise ValueError("MEMG_API_MAX_SAMPLES must be > 0")
        return self

    def to_app_config(self) -> AppConfig:
        """Convert settings into immutable application config.

        Returns:
            AppConfig: Application configuration.
        """
        return AppConfig(
            log_level=self.log_level,
            log_format=self.log_format,
            app_env=self.app_env,
            threads=self.threads,
            api_max_samples=self.api_max_samples,
            cors_allowed_origins=self.cors_allowed_origins_list,
        )

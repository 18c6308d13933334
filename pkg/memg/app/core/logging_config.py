import json
import logging
from datetime import datetime, timezone

from app.core.request_id import get_current_request_id


class TextFormatter(logging.Formatter):
    """Format logs as human-readable text."""

    def __init__(self) -> None:
        super().__init__(
            fmt="%(asctime)s - %(name)s - %(funcName)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )


class JsonFormatter(logging.Formatter):
    """Format logs as JSON lines."""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "timestamp": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "function": record.funcName,
            "message": record.getMessage(),
            "request_id": getattr(record, "request_id", None),
        }
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=True)


class RequestContextFilter(logging.Filter):
    """Attach the current request id when a request is being served."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.request_id = get_current_request_id()
        return True


def build_logging_config(
    log_level: str, log_format: str = "text", stream: str = "stdout"
) -> dict[str, object]:
    """Build the logging configuration dictionary.

    Args:
        log_level: Log level name.
        log_format: Log format ("json" or "text").
        stream: "stdout" or "stderr". The command-line driver logs to stderr
            so stdout carries only results.

    Returns:
        dict[str, object]: Logging configuration for dictConfig.
    """
    formatter = "default_json" if log_format == "json" else "default_text"
    handler = {
        "class": "logging.StreamHandler",
        "formatter": formatter,
        "filters": ["request_context"],
        "stream": f"ext://sys.{stream}",
    }
    logger = {"handlers": ["console"], "level": log_level, "propagate": False}

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default_text": {"()": "app.core.logging_config.TextFormatter"},
            "default_json": {"()": "app.core.logging_config.JsonFormatter"},
        },
        "filters": {
            "request_context": {"()": "app.core.logging_config.RequestContextFilter"},
        },
        "handlers": {"console": handler},
        "loggers": {
            "app": logger,
            "uvicorn": logger,
            "uvicorn.error": logger,
            "uvicorn.access": logger,
        },
    }

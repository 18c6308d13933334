import logging

from app.core.config import AppConfig

logger = logging.getLogger(__name__)


def log_app_configuration(app_config: AppConfig, **extra: object) -> None:
    """Log effective application configuration once at startup.

    Args:
        app_config: Resolved application configuration.
        **extra: Run-specific settings logged alongside, such as the
            subcommand of a command-line run.
    """
    payload = {"app_config": app_config.model_dump(mode="json"), **extra}
    logger.info("startup.config %s", payload)

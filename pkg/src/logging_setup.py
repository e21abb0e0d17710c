"""Logging and error-monitoring bootstrap for command-line entry points."""
import logging

import sentry_sdk

from src.config import get_settings

logger = logging.getLogger(__name__)


def configure_logging(level: str | None = None) -> None:
    """
    Configure root logging and, when a DSN is set, Sentry error monitoring.

    Args:
        level: Optional level name overriding the configured one
    """
    settings = get_settings()
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if settings.sentry_dsn:
        sentry_sdk.init(
            dsn=settings.sentry_dsn,
            traces_sample_rate=0.0,
            environment=settings.environment,
        )
        logger.info("Sentry error monitoring enabled")
    else:
        logger.debug("Sentry error monitoring disabled (set MKV_BISMUT_SENTRY_DSN to enable)")

"""Logging setup (loguru) shared by the CLI and the benchmark."""

import sys

from loguru import logger
from pydantic_settings import BaseSettings, SettingsConfigDict


class LogSettings(BaseSettings):
    """Log verbosity, read from ``FIXCAM_LOG_LEVEL``."""

    model_config = SettingsConfigDict(env_prefix="FIXCAM_")

    log_level: str = "INFO"


def configure_logging(level: str | None = None) -> str:
    """
    Install a single stderr sink.

    Args:
        level: Explicit level; falls back to ``FIXCAM_LOG_LEVEL``.

    Returns:
        The level actually applied.
    """
    applied = (level or LogSettings().log_level).upper()
    logger.remove()
    logger.add(
        sys.stderr,
        level=applied,
        format="<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <7}</level> | "
        "{name}:{line} - {message}",
    )
    return applied

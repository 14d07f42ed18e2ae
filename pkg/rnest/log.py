"""
rnest - Logging
---------------
structlog setup. Modules call ``structlog.get_logger(__name__)``; this module only
decides rendering and level.
"""

import logging
import sys

import structlog

from rnest.config import Settings


def configure_logging(settings: Settings) -> None:
    """Configure structlog to write level-filtered events to stderr."""
    level = logging.getLevelName(settings.log_level.upper())
    if not isinstance(level, int):
        level = logging.INFO

    renderer = (
        structlog.processors.JSONRenderer()
        if settings.log_json
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )

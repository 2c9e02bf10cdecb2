# app/utils/logger.py
"""
Logger utility for the tomography toolkit.

Loggers are structlog bound loggers rendered through the standard logging
module, so context passed as keyword arguments ends up on the same line as
the message.
"""

import logging
import sys
from typing import Any

import structlog

from app.config import settings

_configured = False


def _render_event(_: Any, __: str, event_dict: dict) -> str:
    """Render "message key=value ..." for the stdlib formatter."""
    event = str(event_dict.pop("event", ""))
    if not event_dict:
        return event
    context = " ".join(f"{key}={value}" for key, value in sorted(event_dict.items()))
    return f"{event} {context}"


def _configure() -> None:
    global _configured
    if _configured:
        return

    level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)

    root = logging.getLogger("app")
    root.setLevel(level)
    # Prevent adding multiple handlers if logger already exists
    if not root.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setLevel(level)
        handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))
        root.addHandler(handler)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.format_exc_info,
            _render_event,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    _configured = True


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """
    Get a configured logger instance.

    Args:
        name: The name of the logger, usually ``__name__``.

    Returns:
        A structlog logger writing through the ``app`` logging hierarchy.
    """
    _configure()
    return structlog.get_logger(name)

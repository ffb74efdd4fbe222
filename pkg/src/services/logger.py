from __future__ import annotations

import logging
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from pythonjsonlogger import jsonlogger

MAX_LOG_VALUE_LENGTH = 500  # performance safety limit

_configured_level: int = logging.INFO


class JSONFormatter(jsonlogger.JsonFormatter):
    """
    Line-delimited JSON formatter.

    Fields present in every record:
    - timestamp
    - level
    - message
    - service
    - stage
    - action_details
    """

    def add_fields(
        self,
        log_record: Dict[str, Any],
        record: logging.LogRecord,
        message_dict: Dict[str, Any],
    ) -> None:
        super().add_fields(log_record, record, message_dict)

        log_record["timestamp"] = datetime.now(timezone.utc).isoformat()
        log_record["level"] = record.levelname
        log_record["message"] = record.getMessage()
        log_record.setdefault("service", record.name)
        log_record.setdefault("stage", None)
        log_record.setdefault("action_details", None)

        for key, value in list(log_record.items()):
            if isinstance(value, str) and len(value) > MAX_LOG_VALUE_LENGTH:
                log_record[key] = value[:MAX_LOG_VALUE_LENGTH] + "...[truncated]"


def set_log_level(level: str) -> None:
    """
    Applies a level to every logger created by get_logger, now and later.
    """
    global _configured_level

    resolved = logging.getLevelName(level.upper())
    if not isinstance(resolved, int):
        raise ValueError(f"unknown log level: {level}")

    _configured_level = resolved
    for name in list(logging.root.manager.loggerDict):
        logger = logging.getLogger(name)
        if getattr(logger, "_facebias", False):
            logger.setLevel(resolved)


def get_logger(service_name: str, level: Optional[str] = None) -> logging.Logger:
    """
    Returns a structured JSON logger writing to stderr.

    stdout is reserved for command results, so nothing here writes to it.
    """

    logger = logging.getLogger(service_name)
    logger.setLevel(logging.getLevelName(level.upper()) if level else _configured_level)

    # Prevent duplicate handlers on reload
    if logger.handlers:
        return logger

    handler = logging.StreamHandler(stream=sys.stderr)
    handler.setFormatter(JSONFormatter())
    logger.addHandler(handler)

    logger.propagate = False
    logger._facebias = True  # type: ignore[attr-defined]

    return logger

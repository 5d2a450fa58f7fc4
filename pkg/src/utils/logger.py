"""Utility functions for application logging."""

import logging
import sys
from datetime import datetime
from pathlib import Path

import pytz
from loguru import logger as _loguru


class InterceptHandler(logging.Handler):
    """Forward stdlib logging records to loguru."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            level = _loguru.level(record.levelname).name
        except ValueError:
            level = record.levelno
        _loguru.opt(depth=6, exception=record.exc_info).log(level, f"{record.name} - {record.getMessage()}")


def setup_logging(config: dict, log_to_file: bool = True):
    """Setup logging configuration."""
    level = config.get("level", "INFO")
    format_str = config.get(
        "format",
        "{time:YYYY-MM-DD HH:mm:ss} - {level} - {message}",
    )

    _loguru.remove()
    _loguru.add(sys.stderr, level=level, format=format_str)

    if log_to_file:
        log_dir = Path(__file__).parent.parent.parent / "logs"
        log_dir.mkdir(parents=True, exist_ok=True)
        filename = log_dir / f"igmrf_{datetime.now().strftime('%Y%m%d')}.log"
        _loguru.add(filename, level=level, format=format_str)

    logging.basicConfig(handlers=[InterceptHandler()], level=getattr(logging, level), force=True)

    # Set third-party loggers to WARNING
    logging.getLogger("numexpr").setLevel(logging.WARNING)
    logging.getLogger("concurrent").setLevel(logging.WARNING)


def run_timestamp(timezone: str = "UTC") -> str:
    """ISO timestamp in the configured timezone for artifact headers."""
    return datetime.now(pytz.timezone(timezone)).isoformat(timespec="seconds")

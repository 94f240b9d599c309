"""Logging setup: an optional size-capped log file plus stderr in debug mode."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

from .config import Config

PACKAGE_LOGGER = "coop_analyzer"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
TRUNCATION_MARKER = b"[truncated]\n"

logger = logging.getLogger(__name__)


def enforce_log_cap(log_path: Path, max_bytes: int) -> bool:
    """
    Cut `log_path` down to its newest `max_bytes` bytes.

    The kept tail is prefixed with a truncation marker. Returns True when the
    file was rewritten. Failures are reported on stderr and never raised.
    """
    try:
        data = log_path.read_bytes()
    except FileNotFoundError:
        return False
    except OSError as exc:
        print(f"[coop-analyzer] Cannot read log file {log_path}: {exc}", file=sys.stderr)
        return False
    if len(data) <= max_bytes:
        return False
    if max_bytes <= 0:
        trimmed = b""
    elif max_bytes <= len(TRUNCATION_MARKER):
        # Too small for the marker: keep raw bytes only.
        trimmed = data[-max_bytes:]
    else:
        trimmed = TRUNCATION_MARKER + data[len(data) - (max_bytes - len(TRUNCATION_MARKER)) :]
    try:
        log_path.write_bytes(trimmed)
    except OSError as exc:
        print(f"[coop-analyzer] Cannot trim log file {log_path}: {exc}", file=sys.stderr)
        return False
    return True


class CappedFileHandler(logging.FileHandler):
    """Append records to a file and trim it whenever it outgrows `max_bytes`."""

    def __init__(self, log_path: Path, max_bytes: int) -> None:
        self.max_bytes = max_bytes
        log_path.parent.mkdir(parents=True, exist_ok=True)
        enforce_log_cap(log_path, max_bytes)
        super().__init__(log_path, encoding="utf-8")

    def emit(self, record: logging.LogRecord) -> None:
        super().emit(record)
        path = Path(self.baseFilename)
        try:
            oversized = path.stat().st_size > self.max_bytes
        except OSError:
            return
        if oversized and self.stream is not None:
            # Reopened lazily by FileHandler.emit on the next record.
            self.stream.close()
            self.stream = None  # type: ignore[assignment]
            enforce_log_cap(path, self.max_bytes)


def _reset_handlers(package_logger: logging.Logger) -> None:
    for handler in list(package_logger.handlers):
        if getattr(handler, "_coop_analyzer", False):
            package_logger.removeHandler(handler)
            handler.close()


def configure_logging(config: Config, *, debug: bool = False) -> logging.Logger:
    """
    Attach handlers to the package logger for one CLI run.

    The log file, when configured, never grows past ``config.log_max_bytes``.
    With `debug` every DEBUG record is also mirrored to stderr. Calling this
    again replaces the previous handlers.
    """
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    _reset_handlers(package_logger)
    level = logging.DEBUG if debug else config.log_level_number
    package_logger.setLevel(level)
    formatter = logging.Formatter(LOG_FORMAT)

    handlers: list[logging.Handler] = []
    if config.log_path is not None:
        try:
            handlers.append(CappedFileHandler(config.log_path, config.log_max_bytes))
        except OSError as exc:
            print(f"[coop-analyzer] Failed to open log file {config.log_path}: {exc}", file=sys.stderr)
    if debug:
        handlers.append(logging.StreamHandler(sys.stderr))
    for handler in handlers:
        handler.setFormatter(formatter)
        handler._coop_analyzer = True  # type: ignore[attr-defined]
        package_logger.addHandler(handler)

    logger.debug("Logging configured (level=%s, file=%s)", logging.getLevelName(level), config.log_path)
    return package_logger

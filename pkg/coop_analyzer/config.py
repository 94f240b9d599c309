"""Configuration loading and defaults."""

from __future__ import annotations
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import overload
from dotenv import load_dotenv

from .abstraction import DEFAULT_MAX_PROPERTIES

load_dotenv()

DEFAULT_LOG_MAX_MB = 5
DEFAULT_LOG_MAX_BYTES = DEFAULT_LOG_MAX_MB * 1024 * 1024
DEFAULT_LOG_FILE_NAME = "analysis.log"
_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class Config:
    """Runtime configuration for coop-analyzer."""
    max_properties: int = DEFAULT_MAX_PROPERTIES
    jobs: int = 1
    log_path: Path | None = None
    log_max_bytes: int = DEFAULT_LOG_MAX_BYTES
    log_level: str = "WARNING"

    @property
    def log_level_number(self) -> int:
        return logging.getLevelName(self.log_level)

    @classmethod
    def load(cls) -> "Config":
        """Load configuration from environment variables."""
        @overload
        def _get(name: str, *, default: str) -> str:
            ...

        @overload
        def _get(name: str, *, default: None = None) -> str | None:
            ...

        def _get(name: str, *, default: str | None = None) -> str | None:
            """Read an environment variable, treating blank values as unset."""
            value = os.getenv(name)
            if value is None or value.strip() == "":
                return default
            return value.strip()

        def _positive_int(name: str, default: int) -> int:
            raw = _get(name)
            if raw is None:
                return default
            try:
                value = int(raw)
            except ValueError:
                raise RuntimeError(f"Invalid {name}; must be a positive integer (e.g. {default})")
            if value < 1:
                raise RuntimeError(f"Invalid {name}; must be a positive integer (e.g. {default})")
            return value

        log_max_bytes = DEFAULT_LOG_MAX_BYTES
        raw_mb = _get("COOP_ANALYZER_LOG_MAX_MB")
        raw_bytes = _get("COOP_ANALYZER_LOG_MAX_BYTES")
        if raw_mb is not None:
            try:
                log_max_bytes = int(float(raw_mb) * 1024 * 1024)
            except ValueError:
                raise RuntimeError("Invalid COOP_ANALYZER_LOG_MAX_MB; must be a number (e.g. 5)")
            if log_max_bytes <= 0:
                raise RuntimeError("Invalid COOP_ANALYZER_LOG_MAX_MB; must be greater than 0")
        elif raw_bytes is not None:
            log_max_bytes = _positive_int("COOP_ANALYZER_LOG_MAX_BYTES", DEFAULT_LOG_MAX_BYTES)

        # An unset variable disables the file log; so does an empty one.
        raw_path = _get("COOP_ANALYZER_LOG_PATH")
        log_path: Path | None = None
        if raw_path is not None:
            log_path = Path(raw_path)
            if raw_path.endswith(("/", os.sep)) or log_path.is_dir():
                log_path = log_path / DEFAULT_LOG_FILE_NAME

        log_level = _get("COOP_ANALYZER_LOG_LEVEL", default="WARNING").upper()
        if log_level not in _LOG_LEVELS:
            raise RuntimeError(
                f"Invalid COOP_ANALYZER_LOG_LEVEL; must be one of {', '.join(_LOG_LEVELS)}"
            )

        return cls(
            max_properties=_positive_int("COOP_ANALYZER_MAX_PROPERTIES", DEFAULT_MAX_PROPERTIES),
            jobs=_positive_int("COOP_ANALYZER_JOBS", 1),
            log_path=log_path,
            log_max_bytes=log_max_bytes,
            log_level=log_level,
        )

"""Resolution of spec arguments to files, including the bundled examples."""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

SPEC_SUFFIX = ".csa"
_BUNDLED_NAME_PATTERN = re.compile(r"^[a-z0-9_]+$")


def _bundled_dir() -> Path:
    return Path(str(resources.files("coop_analyzer") / "specs"))


def bundled_specs() -> list[str]:
    """File names of the example specs shipped with the package."""
    directory = _bundled_dir()
    if not directory.is_dir():
        return []
    return sorted(path.name for path in directory.glob(f"*{SPEC_SUFFIX}"))


def resolve_spec_path(raw: str) -> Path:
    """
    Turn a CLI spec argument into an existing file path.

    - An existing file wins
    - Otherwise the name of a bundled example, with or without ``.csa``
    - Bundled names are restricted to [a-z0-9_] to avoid path traversal
    """
    candidate = Path(raw)
    if candidate.is_file():
        return candidate
    stem = raw[: -len(SPEC_SUFFIX)] if raw.endswith(SPEC_SUFFIX) else raw
    if _BUNDLED_NAME_PATTERN.fullmatch(stem):
        bundled = _bundled_dir() / f"{stem}{SPEC_SUFFIX}"
        if bundled.is_file():
            return bundled
    available = ", ".join(bundled_specs()) or "none"
    raise FileNotFoundError(f"Spec file not found: {raw} (bundled examples: {available})")

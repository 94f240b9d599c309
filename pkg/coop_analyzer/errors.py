"""Exception hierarchy and diagnostics shared across the analyzer."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceLocation:
    """1-based line/column position inside an input text."""
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class AnalysisError(RuntimeError):
    """Base class for every error raised by the analyzer."""

    def __init__(self, message: str, location: SourceLocation | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.location = location

    def __str__(self) -> str:
        if self.location is None:
            return self.message
        return f"{self.location}: {self.message}"


class LogicError(AnalysisError):
    """Raised for malformed atoms, arity conflicts and bad axioms."""


class PatternError(AnalysisError):
    """Raised when a pattern cannot be instantiated or its image is not total."""


class PropertySpaceError(AnalysisError):
    """Raised when the property space is intractable or a conjunction is not a member."""


class SpecSyntaxError(AnalysisError):
    """Raised by the spec parser; always carries a location."""


class LogiCalcError(AnalysisError):
    """Raised while parsing or evaluating the LogiCalc fragment."""


class MissingInitialError(LogiCalcError):
    """Raised when a LogiCalc model uses c0 but neither defines nor receives it."""


@dataclass(frozen=True)
class Diagnostic:
    """A validation finding. Diagnostics are reported, never raised."""
    code: str
    message: str
    location: SourceLocation | None = None
    severity: str = "error"

    def __str__(self) -> str:
        where = f"{self.location}: " if self.location is not None else ""
        return f"{where}{self.severity}[{self.code}]: {self.message}"

"""Exception types shared across the package."""

from __future__ import annotations


class CapmatchError(Exception):
    """Base class for all data and validation errors raised by capmatch."""


class ManifestError(CapmatchError):
    """Malformed or inconsistent caption manifest."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TermFileError(CapmatchError):
    """Malformed term database or synonym lexicon."""


class MetricError(CapmatchError):
    """Invalid input to a metric computation."""

"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class ProbAlignError(Exception):
    exit_code = 1


class UsageError(ProbAlignError):
    exit_code = 1


class ParseError(ProbAlignError):
    """Malformed input file. ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructuralError(ProbAlignError):
    """The net or graph violates a structural invariant."""

    exit_code = 2


class PreconditionError(ProbAlignError):
    exit_code = 1


class ModelAssumptionError(ProbAlignError):
    """Unsafe net, unbounded silence, tau-only cycle, state explosion."""

    exit_code = 3

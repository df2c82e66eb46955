"""Exception types shared across the package."""

from __future__ import annotations


class ChoirError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(ChoirError, ValueError):
    """A value or file violates a structural invariant.

    Carries an optional file location so callers can report
    ``path:line: message`` for malformed input files.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class BackendError(ChoirError):
    """A backend operation failed. ``code`` mirrors the wire-protocol error codes."""

    code = "INTERNAL"


class UnknownStreamError(BackendError):
    code = "UNKNOWN_STREAM"


class TokenOutOfRangeError(BackendError):
    code = "TOKEN_OUT_OF_RANGE"


class CapacityError(BackendError):
    code = "CAPACITY"


class FixtureExhaustedError(BackendError):
    """A scripted stream was asked for more steps than its fixture declares."""


class DecodeError(ChoirError):
    """A decode failed mid-run; ``traces`` holds the steps completed so far."""

    def __init__(self, message: str, traces: tuple = ()):
        super().__init__(message)
        self.traces = tuple(traces)

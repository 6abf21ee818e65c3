"""Exception hierarchy shared across the toolkit.

``OrdkitError`` is the common base; CLI maps ``UsageError`` to exit code 1
and every other ``OrdkitError`` (data / validation problems) to exit code 2.
"""


class OrdkitError(Exception):
    """Base class for all toolkit errors."""


class UsageError(OrdkitError):
    """Bad command-line invocation or malformed configuration."""


class DataError(OrdkitError):
    """Malformed input data. Carries row/column location when known."""

    def __init__(self, message, *, row=None, column=None, path=None):
        loc = []
        if path is not None:
            loc.append(f"file {path!r}")
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column
        self.path = path


class SchemaError(DataError):
    """Schema file is invalid or the data does not conform to it."""


class FitError(OrdkitError):
    """A model or generator could not be fitted on the given data."""


class SamplingError(OrdkitError):
    """A generator could not produce the requested sample."""


class ExperimentError(OrdkitError):
    """A pipeline cell failed; the message names the (mode, classifier, seed)."""

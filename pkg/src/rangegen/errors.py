"""Exception hierarchy shared across the package.

The CLI maps each class to a distinct exit code, so raising the right type
matters more than the message text.
"""


class RangegenError(Exception):
    """Base class for all package errors."""


class UsageError(RangegenError):
    """Caller passed arguments that violate a documented precondition."""


class ConfigurationError(RangegenError):
    """Inconsistent shapes, bounds, or config values."""


class TrainingFault(RangegenError):
    """Training produced a non-finite quantity and was aborted."""


class DatasetParseError(RangegenError):
    """A dataset or report file is malformed; message names the offending row."""

"""Exception hierarchy shared across the package.

Each error class carries the CLI exit code used when the error escapes a
subcommand, so failure modes stay distinguishable in scripts.
"""


class SentinelError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class MissingInputError(SentinelError):
    """A required file (data, model, config) does not exist."""

    exit_code = 2


class DataFormatError(SentinelError):
    """Malformed CSV row, bad header, unknown label, or shape mismatch."""

    exit_code = 3


class ConfigError(SentinelError):
    """Invalid configuration value or structure."""

    exit_code = 4


class TrainingError(SentinelError):
    """Training aborted (non-finite loss, no convergent fit, ...)."""

    exit_code = 5

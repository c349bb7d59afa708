"""Exception taxonomy shared by the whole package.

Every error raised on purpose derives from :class:`GridcastError` and carries
the process exit code the CLI maps it to.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class GridcastError(Exception):
    exit_code = 1


class ConfigError(GridcastError):
    """Invalid configuration value or inconsistent option combination."""

    exit_code = EXIT_CONFIG


class DomainError(ConfigError):
    """Argument outside the documented domain of an operation."""


class DataError(GridcastError):
    """Problem with on-disk or in-memory data rather than configuration."""

    exit_code = EXIT_DATA


class FormatError(DataError):
    """Container header does not describe what the caller expects."""


class CorruptionError(DataError):
    """Container payload is truncated or otherwise inconsistent."""


class ParseError(DataError):
    """File content cannot be parsed into its declared structure."""


class CoverageError(DataError):
    """Date falls outside the period a calendar declares coverage for."""


class ProviderError(DataError):
    """A calendar provider could not deliver the requested document."""


class WindowOutOfRangeError(DataError):
    """Requested sample window needs frames that do not exist."""


class ShapeError(DataError):
    """Tensor shapes do not line up for the requested operation."""


class NumericError(GridcastError):
    """Non-finite value encountered during training or gradient computation."""

    exit_code = EXIT_NUMERIC

    def __init__(self, message, batch_id=None):
        super().__init__(message)
        self.batch_id = batch_id

"""Exception hierarchy shared by every stage of the pipeline."""


class BotampError(Exception):
    """Base class for all package errors."""


class ValidationError(BotampError, ValueError):
    """Input data violates a contract (bad row, empty input, range error)."""


class SchemaError(ValidationError):
    """A file is missing required columns or is structurally unusable."""


class NumericError(BotampError, ArithmeticError):
    """A numeric routine produced a non-finite value."""


class CheckpointError(BotampError, OSError):
    """The harvest checkpoint could not be read or appended to."""


class ConfigError(BotampError, ValueError):
    """Pipeline configuration is invalid."""

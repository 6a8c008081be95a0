"""Exception types shared across the package."""


class RiskcardsError(Exception):
    """Base class for all package errors."""


class DataValidationError(RiskcardsError):
    """Input data or argument values fail a documented precondition."""


class SchemaMismatchError(DataValidationError):
    """A record or dataset does not match the fitted variable schema."""

    def __init__(self, variable: str, message: str | None = None):
        self.variable = variable
        super().__init__(message or f"variable {variable!r} missing from input")


class ConfigError(RiskcardsError):
    """Invalid run configuration or constraint setup."""


class ConstraintViolationError(RiskcardsError):
    """A solution or initializer violates a named constraint."""


class UndefinedMetricError(RiskcardsError):
    """Metric is undefined for the given inputs (e.g. single-class labels)."""


class ParseError(RiskcardsError):
    """Malformed or unsupported serialized document."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)

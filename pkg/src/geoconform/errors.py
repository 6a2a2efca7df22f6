"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: ``ConfigError`` -> 2,
``DataError`` -> 3, anything else -> 4.
"""


class GeoconformError(Exception):
    pass


class ConfigError(GeoconformError, ValueError):
    """Bad or malformed configuration."""


class DataError(GeoconformError, ValueError):
    """Input data violates a contract (schema, too few locations, ...)."""


class ContractError(GeoconformError, ValueError):
    """A caller broke a function precondition (bad shapes, out-of-domain input)."""


class MissingPoolError(DataError, KeyError):
    """Per-region calibration has no pool for the requested region."""

    def __str__(self):
        return Exception.__str__(self)


class StageError(GeoconformError):
    """Wraps a failure inside a pipeline stage, carrying the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

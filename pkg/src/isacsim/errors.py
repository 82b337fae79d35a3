"""Exception types shared across the library.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric failures with 3.
"""


class IsacError(Exception):
    """Base class for all library errors."""


class ConfigError(IsacError):
    """Invalid configuration or arguments: bad parameter ranges, dimension
    mismatches, unknown scenario names, and similar caller mistakes."""


class NumericError(IsacError):
    """A numeric routine failed its accuracy or validity contract
    (non-convergent integration, division by a zero reference symbol,
    degenerate input to a metric)."""


class CalibrationError(NumericError):
    """A Monte-Carlo calibration could not bracket or converge."""

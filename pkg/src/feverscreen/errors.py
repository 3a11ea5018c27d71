"""Exception types shared across the package.

The CLI maps these onto process exit codes (config 2, data 3, numeric 4),
so library code should raise the most specific one that applies.
"""


class FeverscreenError(Exception):
    """Base class for package errors."""


class ConfigError(FeverscreenError):
    """Invalid or inconsistent configuration (unknown key, bad type, bad value)."""


class DataError(FeverscreenError):
    """Missing, malformed, or mismatched input data."""


class NumericError(FeverscreenError):
    """Non-finite values or a numerically unusable system."""

"""Exception types raised across the package."""


class FormatError(ValueError):
    """A file could not be decoded (bad header, truncated payload, unknown type)."""


class DimensionError(ValueError):
    """Array shapes are incompatible or too small for the requested operation."""


class SingularityError(ArithmeticError):
    """A Fourier-domain divisor or a dense operator is (numerically) singular."""


class ConfigError(ValueError):
    """Invalid configuration value or unknown option."""


class SizeGuardError(ValueError):
    """A dense test oracle was asked to build a matrix that is too large."""

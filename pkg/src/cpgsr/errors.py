"""Exception hierarchy shared across the package."""


class CpgsrError(Exception):
    """Base class for all package errors."""


class ShapeError(CpgsrError):
    """Operand shapes are inconsistent or violate an op precondition."""


class NumericalError(CpgsrError):
    """A computation produced NaN/Inf or was fed non-finite values."""


class ConfigError(CpgsrError):
    """Invalid configuration value or combination."""


class FormatError(CpgsrError):
    """Base class for file-format errors."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class TruncatedFileError(FormatError):
    """File ended before the declared payload was read."""


class DimensionMismatchError(FormatError):
    """Declared dimensions are inconsistent with the payload or context."""

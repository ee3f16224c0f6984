"""Coding-prior-guided 2x super-resolution with a synthetic codec simulator."""

from .tensor import Tensor
from .conv import ConvParams, conv2d
from .errors import (
    BadMagicError,
    ConfigError,
    CpgsrError,
    DimensionMismatchError,
    FormatError,
    NumericalError,
    ShapeError,
    TruncatedFileError,
)

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "ConvParams",
    "conv2d",
    "CpgsrError",
    "ShapeError",
    "NumericalError",
    "ConfigError",
    "FormatError",
    "BadMagicError",
    "TruncatedFileError",
    "DimensionMismatchError",
    "__version__",
]

"""Utility modules for SoftDropConnect."""

from .errors import (
    ConfigurationError,
    ConsistencyError,
    DataError,
    DegenerateMaskError,
    DimensionError,
    DomainError,
    IdxFormatError,
    IdxLengthError,
    NumericalError,
    SoftDropConnectError,
)
from .helpers import ResultWriter, ensure_directory, setup_logging

__all__ = [
    "setup_logging",
    "ensure_directory",
    "ResultWriter",
    "SoftDropConnectError",
    "ConfigurationError",
    "DegenerateMaskError",
    "DimensionError",
    "DomainError",
    "DataError",
    "IdxFormatError",
    "IdxLengthError",
    "ConsistencyError",
    "NumericalError",
]

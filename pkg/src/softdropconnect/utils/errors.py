"""Error hierarchy shared by every SoftDropConnect module.

Each class carries the process exit code the CLI reports for it.
"""

from typing import Optional


class SoftDropConnectError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(SoftDropConnectError, ValueError):
    """Invalid configuration or argument combination."""

    exit_code = 2


class DegenerateMaskError(ConfigurationError):
    """A mask law whose expected value is zero cannot be normalized."""


class DimensionError(SoftDropConnectError, ValueError):
    """Tensor shapes do not fit the operation."""

    exit_code = 2


class DomainError(SoftDropConnectError, ValueError):
    """Input outside the mathematical domain of a metric."""

    exit_code = 2


class DataError(SoftDropConnectError):
    """Dataset files are missing, malformed or inconsistent."""

    exit_code = 3


class IdxFormatError(DataError):
    """IDX header does not match the expected layout."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class IdxLengthError(DataError):
    """IDX payload is shorter or longer than its header declares."""

    def __init__(self, expected: int, actual: int):
        super().__init__(
            f"IDX payload length mismatch: expected {expected} bytes, got {actual}"
        )
        self.expected = expected
        self.actual = actual


class ConsistencyError(DataError):
    """Paired dataset files disagree (e.g. image and label counts)."""


class NumericalError(SoftDropConnectError, ArithmeticError):
    """Non-finite values encountered during training."""

    exit_code = 4

    def __init__(
        self,
        message: str,
        epoch: Optional[int] = None,
        batch: Optional[int] = None,
        parameter: Optional[str] = None,
    ):
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        if parameter is not None:
            where.append(f"parameter '{parameter}'")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.epoch = epoch
        self.batch = batch
        self.parameter = parameter

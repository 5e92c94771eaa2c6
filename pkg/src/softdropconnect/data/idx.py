"""
IDX container parsing.

Layout (big-endian)::

    u8  0x00
    u8  0x00
    u8  dtype code (0x08 = unsigned byte)
    u8  rank
    u32 dims[rank]
    payload, row-major
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..utils.errors import DataError, IdxFormatError, IdxLengthError
from ..utils.helpers import setup_logging

logger = setup_logging(__name__)

UNSIGNED_BYTE = 0x08
HEADER_BYTES = 4


@dataclass(frozen=True)
class IdxArray:
    """Parsed IDX file."""

    dtype_code: int
    dims: Tuple[int, ...]
    payload: np.ndarray

    def __post_init__(self):
        expected = int(np.prod(self.dims, dtype=np.int64))
        if self.payload.size != expected:
            raise IdxLengthError(expected, int(self.payload.size))

    @property
    def rank(self) -> int:
        return len(self.dims)

    def to_numpy(self) -> np.ndarray:
        return self.payload.reshape(self.dims)


def parse_idx(data: bytes) -> IdxArray:
    """
    Parse an in-memory IDX file.

    Args:
        data: Raw file contents

    Returns:
        IdxArray with dims decoded big-endian and the payload as uint8

    Raises:
        IdxFormatError: Bad magic bytes or truncated header
        IdxLengthError: Payload size differs from the product of dims
    """
    data = bytes(data)
    if len(data) < HEADER_BYTES:
        raise IdxFormatError("file shorter than the 4-byte magic", offset=len(data))
    for offset in (0, 1):
        if data[offset] != 0:
            raise IdxFormatError(f"magic byte must be 0x00, found 0x{data[offset]:02x}", offset=offset)
    dtype_code, rank = data[2], data[3]
    if dtype_code != UNSIGNED_BYTE:
        raise IdxFormatError(f"unsupported dtype code 0x{dtype_code:02x}", offset=2)
    if rank < 1:
        raise IdxFormatError("rank must be at least 1", offset=3)

    header_end = HEADER_BYTES + 4 * rank
    if len(data) < header_end:
        raise IdxFormatError(
            f"header declares rank {rank} but holds only {len(data) - HEADER_BYTES} dimension bytes",
            offset=len(data),
        )
    dims = struct.unpack(f">{rank}I", data[HEADER_BYTES:header_end])

    expected = int(np.prod(dims, dtype=np.int64))
    actual = len(data) - header_end
    if actual != expected:
        raise IdxLengthError(expected, actual)

    payload = np.frombuffer(data, dtype=np.uint8, offset=header_end).copy()
    return IdxArray(dtype_code=dtype_code, dims=tuple(int(d) for d in dims), payload=payload)


def serialize_idx(array: np.ndarray) -> bytes:
    """Encode an integer array with values in [0,255] as an unsigned-byte IDX file."""
    array = np.asarray(array)
    if array.ndim < 1:
        raise DataError("IDX arrays need rank >= 1")
    if array.ndim > 255:
        raise DataError(f"IDX rank is limited to 255, got {array.ndim}")
    if array.size and (array.min() < 0 or array.max() > 255 or not np.all(array == np.round(array))):
        raise DataError("only integer values in [0,255] can be stored as unsigned bytes")
    header = bytes([0, 0, UNSIGNED_BYTE, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=np.uint8).tobytes()


def read_idx_file(path: Union[str, Path]) -> IdxArray:
    """Parse an IDX file from disk."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"IDX file not found: {path}")
    array = parse_idx(path.read_bytes())
    logger.debug(f"Read {path.name}: dims {array.dims}")
    return array

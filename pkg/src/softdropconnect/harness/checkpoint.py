"""
SDCN1 checkpoint container.

Layout::

    b"SDCN1"
    u32 little-endian header length
    header: canonical JSON {"config", "format", "tensors": [{"name", "kind", "shape"}]}
    payloads: float64 little-endian, in table order

Parameters come first in lexicographic path order, then batchnorm buffers.
"""

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ..core.layers import Network
from ..utils.errors import ConfigurationError, DataError
from ..utils.helpers import ResultWriter, setup_logging
from .config import ExperimentConfig, build_config

logger = setup_logging(__name__)

MAGIC = b"SDCN1"
FORMAT = "SDCN1"
CHECKPOINT_FILE = "checkpoint.sdcn"
_LE_FLOAT64 = np.dtype("<f8")


@dataclass
class Checkpoint:
    """Decoded checkpoint contents."""

    config: ExperimentConfig
    params: Dict[str, np.ndarray]
    buffers: Dict[str, np.ndarray]

    def restore(self, model: Network) -> Network:
        """Load parameters and buffers into a freshly built ``model``."""
        model.store.load_state_dict(self.params)
        model.load_buffers(self.buffers)
        return model


def _tensor_table(model: Network) -> List[Tuple[str, str, np.ndarray]]:
    table = [(path, "param", tensor.data) for path, tensor in model.store.items()]
    table += [(name, "buffer", values) for name, values in model.buffers().items()]
    return table


def state_digest(model: Network) -> str:
    """SHA-256 over tensor names, shapes and values (the config is not included)."""
    digest = hashlib.sha256()
    for name, kind, values in _tensor_table(model):
        digest.update(f"{kind}:{name}:{values.shape}".encode())
        digest.update(np.ascontiguousarray(values, dtype=_LE_FLOAT64).tobytes())
    return digest.hexdigest()


def encode_checkpoint(model: Network, config: ExperimentConfig) -> bytes:
    table = _tensor_table(model)
    header = {
        "config": config.model_dump(mode="json"),
        "format": FORMAT,
        "tensors": [{"kind": kind, "name": name, "shape": list(values.shape)} for name, kind, values in table],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(values, dtype=_LE_FLOAT64).tobytes() for _, _, values in table)
    return MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + payload


def decode_checkpoint(data: bytes) -> Checkpoint:
    """
    Parse checkpoint bytes.

    Raises:
        DataError: Wrong magic, malformed header, or payload size mismatch
    """
    if not data.startswith(MAGIC):
        raise DataError("not an SDCN1 checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(data) < offset + 4:
        raise DataError("checkpoint truncated inside the header length")
    (header_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    try:
        header = json.loads(data[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"checkpoint header is not valid JSON: {e}") from e
    offset += header_len

    params: Dict[str, np.ndarray] = {}
    buffers: Dict[str, np.ndarray] = {}
    for entry in header.get("tensors", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * _LE_FLOAT64.itemsize
        if end > len(data):
            raise DataError(f"checkpoint truncated in tensor '{entry['name']}'")
        values = np.frombuffer(data, dtype=_LE_FLOAT64, count=count, offset=offset).astype(np.float64)
        target = params if entry["kind"] == "param" else buffers
        target[entry["name"]] = values.reshape(shape)
        offset = end
    if offset != len(data):
        raise DataError(f"checkpoint has {len(data) - offset} trailing bytes")

    try:
        config = build_config(header["config"])
    except (KeyError, ConfigurationError) as e:
        raise DataError(f"checkpoint config is invalid: {e}") from e
    return Checkpoint(config=config, params=params, buffers=buffers)


def save_checkpoint(model: Network, config: ExperimentConfig, directory: Union[str, Path]) -> Path:
    """Write ``checkpoint.sdcn`` into ``directory``."""
    path = ResultWriter.for_directory(Path(directory)).write_bytes(
        CHECKPOINT_FILE, encode_checkpoint(model, config)
    )
    logger.info(f"Saved checkpoint {path} (state {state_digest(model)[:12]})")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())

"""Dataset parsing, generation and batching."""

from .datasets import (
    MNIST_CLASSES,
    Dataset,
    SplitSpec,
    batch_iter,
    load_mnist,
    load_mnist_splits,
    synth_blobs,
)
from .idx import IdxArray, parse_idx, read_idx_file, serialize_idx

__all__ = [
    "IdxArray",
    "parse_idx",
    "serialize_idx",
    "read_idx_file",
    "Dataset",
    "SplitSpec",
    "load_mnist",
    "load_mnist_splits",
    "synth_blobs",
    "batch_iter",
    "MNIST_CLASSES",
]

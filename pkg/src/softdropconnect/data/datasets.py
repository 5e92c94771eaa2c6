"""
Datasets, MNIST splits, synthetic blobs and batch iteration.
"""

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..core.rng import DATA, SHUFFLE, derive_seed
from ..utils.errors import ConfigurationError, ConsistencyError, DataError
from ..utils.helpers import setup_logging
from .idx import read_idx_file

logger = setup_logging(__name__)

SplitTag = Literal["train", "val", "test"]
MNIST_CLASSES = 10
PIXEL_SCALE = 255.0


@dataclass(frozen=True)
class Dataset:
    """Inputs scaled to [0,1] with integer labels; arrays are read-only."""

    inputs: np.ndarray
    labels: np.ndarray
    split: str
    n_classes: int

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if inputs.shape[0] != labels.shape[0]:
            raise ConsistencyError(f"{inputs.shape[0]} inputs but {labels.shape[0]} labels")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ConsistencyError(f"labels must lie in [0,{self.n_classes})")
        if inputs.size and (inputs.min() < 0.0 or inputs.max() > 1.0):
            raise DataError("inputs must be scaled to [0,1]")
        inputs.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return tuple(self.inputs.shape[1:])

    def subset(self, indices) -> "Dataset":
        return Dataset(self.inputs[indices], self.labels[indices], self.split, self.n_classes)

    def fingerprint(self) -> str:
        """SHA-256 over shapes, inputs and labels."""
        digest = hashlib.sha256()
        digest.update(repr((self.inputs.shape, self.n_classes)).encode())
        digest.update(np.ascontiguousarray(self.inputs).tobytes())
        digest.update(np.ascontiguousarray(self.labels).tobytes())
        return digest.hexdigest()


class SplitSpec(BaseModel):
    """
    Which MNIST items form each split.

    ``train`` is the first ``train_size`` items of the training file, ``val``
    the ``val_size`` items starting at ``val_offset`` in the same file, and
    ``test`` the first ``test_size`` items of the test file.
    """

    train_size: int = Field(default=5000, ge=1)
    val_size: int = Field(default=1000, ge=0)
    test_size: int = Field(default=1000, ge=1)
    val_offset: int = Field(default=50000, ge=0)
    train_images: str = "train-images-idx3-ubyte"
    train_labels: str = "train-labels-idx1-ubyte"
    test_images: str = "t10k-images-idx3-ubyte"
    test_labels: str = "t10k-labels-idx1-ubyte"

    @model_validator(mode="after")
    def check_disjoint(self) -> "SplitSpec":
        if self.val_size and self.train_size > self.val_offset:
            raise ValueError(
                f"train items [0,{self.train_size}) overlap validation items from {self.val_offset}"
            )
        return self

    @classmethod
    def full(cls) -> "SplitSpec":
        return cls(train_size=50000, val_size=10000, test_size=10000, val_offset=50000)


def _read_pair(directory: Path, images_name: str, labels_name: str) -> Tuple[np.ndarray, np.ndarray]:
    images = read_idx_file(directory / images_name)
    labels = read_idx_file(directory / labels_name)
    if images.rank != 3:
        raise DataError(f"{images_name}: expected rank-3 images, got dims {images.dims}")
    if labels.rank != 1:
        raise DataError(f"{labels_name}: expected rank-1 labels, got dims {labels.dims}")
    if images.dims[0] != labels.dims[0]:
        raise ConsistencyError(
            f"{images_name} holds {images.dims[0]} images but {labels_name} holds {labels.dims[0]} labels"
        )
    return images.to_numpy(), labels.to_numpy()


def _slice(images: np.ndarray, labels: np.ndarray, start: int, size: int, split: str) -> Dataset:
    if size == 0:
        start = 0
    elif start + size > len(labels):
        raise DataError(f"{split} split needs items [{start},{start + size}) but the file holds {len(labels)}")
    x = images[start:start + size].astype(np.float64)[:, np.newaxis] / PIXEL_SCALE
    return Dataset(x, labels[start:start + size].astype(np.int64), split, MNIST_CLASSES)


def load_mnist_splits(directory: Union[str, Path], split_spec: Optional[SplitSpec] = None) -> Dict[str, Dataset]:
    """
    Load train, val and test splits from the four MNIST IDX files.

    Args:
        directory: Directory holding the uncompressed IDX files
        split_spec: Split sizes and file names (desk-scale defaults)

    Returns:
        Mapping split tag -> Dataset with inputs [n,1,28,28]
    """
    spec = split_spec or SplitSpec()
    directory = Path(directory)
    train_images, train_labels = _read_pair(directory, spec.train_images, spec.train_labels)
    test_images, test_labels = _read_pair(directory, spec.test_images, spec.test_labels)

    splits = {
        "train": _slice(train_images, train_labels, 0, spec.train_size, "train"),
        "val": _slice(train_images, train_labels, spec.val_offset, spec.val_size, "val"),
        "test": _slice(test_images, test_labels, 0, spec.test_size, "test"),
    }
    logger.info(
        f"Loaded MNIST from {directory}: "
        + ", ".join(f"{tag} {len(ds)}" for tag, ds in splits.items())
    )
    return splits


def load_mnist(
    directory: Union[str, Path],
    split_spec: Optional[SplitSpec] = None,
    split: SplitTag = "train",
) -> Dataset:
    """Load a single MNIST split."""
    return load_mnist_splits(directory, split_spec)[split]


def synth_blobs(
    K: int,
    n_per_class: int,
    noise_sigma: float,
    seed: int,
    image_size: Optional[int] = None,
    split: str = "train",
) -> Dataset:
    """
    Gaussian class blobs centred on the unit circle.

    Features are mapped affinely from [−R,R] with R = 1 + 4σ onto [0,1] and
    clipped. With ``image_size`` each sample becomes a 1×s×s image whose left
    half holds the first feature and right half the second.

    Args:
        K: Number of classes (>= 2)
        n_per_class: Samples per class
        noise_sigma: Isotropic standard deviation around each centre
        seed: Generator seed
        image_size: Render as images of this even size instead of 2-vectors
        split: Split tag

    Returns:
        Dataset in a seed-determined shuffled order
    """
    if K < 2:
        raise ConfigurationError(f"synth_blobs needs K >= 2, got {K}")
    if n_per_class < 1 or noise_sigma < 0:
        raise ConfigurationError("synth_blobs needs n_per_class >= 1 and noise_sigma >= 0")
    if image_size is not None and (image_size < 2 or image_size % 2):
        raise ConfigurationError(f"image_size must be an even number >= 2, got {image_size}")

    rng = derive_seed(seed, DATA)
    angles = 2.0 * math.pi * np.arange(K) / K
    centres = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    labels = np.repeat(np.arange(K), n_per_class)
    points = centres[labels] + noise_sigma * rng.standard_normal((labels.size, 2))

    radius = 1.0 + 4.0 * noise_sigma
    features = np.clip((points + radius) / (2.0 * radius), 0.0, 1.0)
    order = rng.permutation(labels.size)
    features, labels = features[order], labels[order]

    if image_size is not None:
        half = image_size // 2
        images = np.empty((labels.size, 1, image_size, image_size))
        images[:, 0, :, :half] = features[:, 0, None, None]
        images[:, 0, :, half:] = features[:, 1, None, None]
        return Dataset(images, labels, split, K)
    return Dataset(features, labels, split, K)


def batch_iter(
    dataset: Dataset,
    batch_size: int,
    shuffle_seed: Optional[int] = None,
    epoch: int = 0,
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """
    Yield (inputs, labels) batches; the last partial batch is included.

    With ``shuffle_seed`` the order is a permutation keyed by (seed, epoch);
    without it items come in dataset order.
    """
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    n = len(dataset)
    order = np.arange(n) if shuffle_seed is None else derive_seed(shuffle_seed, SHUFFLE, epoch).permutation(n)
    for start in range(0, n, batch_size):
        index = order[start:start + batch_size]
        yield dataset.inputs[index], dataset.labels[index]

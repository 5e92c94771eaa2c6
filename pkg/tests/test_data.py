"""Tests for IDX parsing, MNIST splits, synthetic blobs and batching."""

from pathlib import Path

import numpy as np
import pytest

from softdropconnect.data import (
    Dataset,
    SplitSpec,
    batch_iter,
    load_mnist_splits,
    parse_idx,
    read_idx_file,
    serialize_idx,
    synth_blobs,
)
from softdropconnect.utils.errors import (
    ConfigurationError,
    ConsistencyError,
    DataError,
    IdxFormatError,
    IdxLengthError,
)


def _write_mnist(directory: Path, n_train=12, n_test=5, n_train_labels=None):
    rng = np.random.default_rng(0)
    files = {
        "train-images-idx3-ubyte": rng.integers(0, 256, size=(n_train, 28, 28)),
        "train-labels-idx1-ubyte": np.arange(n_train_labels or n_train) % 10,
        "t10k-images-idx3-ubyte": rng.integers(0, 256, size=(n_test, 28, 28)),
        "t10k-labels-idx1-ubyte": (np.arange(n_test) + 3) % 10,
    }
    for name, array in files.items():
        (directory / name).write_bytes(serialize_idx(array))
    return files


class TestIdx:
    """Test cases for the IDX container."""

    def test_rank3_fixture(self):
        data = bytes([0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2]) + bytes(range(8))
        array = parse_idx(data)
        assert array.dims == (2, 2, 2)
        assert array.rank == 3
        assert array.payload.tolist() == list(range(8))
        assert array.to_numpy()[1, 1, 1] == 7

    def test_label_fixture(self):
        array = parse_idx(bytes([0, 0, 8, 1, 0, 0, 0, 3, 7, 2, 9]))
        assert array.dims == (3,)
        assert array.payload.tolist() == [7, 2, 9]

    def test_truncated_payload(self):
        with pytest.raises(IdxLengthError) as excinfo:
            parse_idx(bytes([0, 0, 8, 1, 0, 0, 0, 3, 7, 2]))
        assert excinfo.value.expected == 3
        assert excinfo.value.actual == 2

    def test_bad_magic(self):
        with pytest.raises(IdxFormatError) as excinfo:
            parse_idx(bytes([0, 1, 8, 1, 0, 0, 0, 1, 5]))
        assert excinfo.value.offset == 1

    def test_unsupported_dtype_and_short_header(self):
        with pytest.raises(IdxFormatError) as excinfo:
            parse_idx(bytes([0, 0, 0x0D, 1, 0, 0, 0, 1, 5]))
        assert excinfo.value.offset == 2
        with pytest.raises(IdxFormatError):
            parse_idx(bytes([0, 0, 8, 2, 0, 0, 0, 1]))
        with pytest.raises(IdxFormatError):
            parse_idx(b"\x00\x00")

    def test_round_trip_random_arrays(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            rank = int(rng.integers(1, 5))
            shape = tuple(int(d) for d in rng.integers(1, 6, size=rank))
            array = rng.integers(0, 256, size=shape)
            parsed = parse_idx(serialize_idx(array))
            assert parsed.dims == shape
            np.testing.assert_array_equal(parsed.to_numpy(), array)

    def test_serialize_rejects_out_of_range(self):
        with pytest.raises(DataError):
            serialize_idx(np.array([256]))
        with pytest.raises(DataError):
            serialize_idx(np.array(5))

    def test_read_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_idx_file(tmp_path / "missing")


class TestMnistSplits:
    """Test cases for load_mnist_splits."""

    def test_disjoint_splits(self, tmp_path):
        files = _write_mnist(tmp_path)
        spec = SplitSpec(train_size=4, val_size=3, val_offset=8, test_size=5)
        splits = load_mnist_splits(tmp_path, spec)

        assert len(splits["train"]) == 4
        assert splits["train"].input_shape == (1, 28, 28)
        assert splits["val"].labels.tolist() == [8, 9, 0]
        assert splits["test"].labels.tolist() == [3, 4, 5, 6, 7]
        np.testing.assert_allclose(
            splits["train"].inputs[0, 0], files["train-images-idx3-ubyte"][0] / 255.0
        )

    def test_empty_validation_split(self, tmp_path):
        _write_mnist(tmp_path)
        splits = load_mnist_splits(tmp_path, SplitSpec(train_size=4, val_size=0, test_size=2))
        assert len(splits["val"]) == 0

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            SplitSpec(train_size=10, val_size=2, val_offset=5)

    def test_label_count_mismatch(self, tmp_path):
        _write_mnist(tmp_path, n_train_labels=11)
        with pytest.raises(ConsistencyError):
            load_mnist_splits(tmp_path, SplitSpec(train_size=4, val_size=0, test_size=2))

    def test_split_exceeds_file(self, tmp_path):
        _write_mnist(tmp_path)
        with pytest.raises(DataError):
            load_mnist_splits(tmp_path, SplitSpec(train_size=20, val_size=0, test_size=2))

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError):
            load_mnist_splits(tmp_path / "nowhere")


class TestDatasets:
    """Test cases for Dataset, synth_blobs and batch_iter."""

    def test_dataset_is_read_only_copy(self):
        inputs = np.zeros((2, 2))
        dataset = Dataset(inputs, [0, 1], "train", 2)
        inputs[0, 0] = 1.0
        assert dataset.inputs[0, 0] == 0.0
        assert inputs.flags.writeable
        with pytest.raises(ValueError):
            dataset.inputs[0, 0] = 1.0

    def test_dataset_validation(self):
        with pytest.raises(ConsistencyError):
            Dataset(np.zeros((2, 2)), [0], "train", 2)
        with pytest.raises(ConsistencyError):
            Dataset(np.zeros((1, 2)), [3], "train", 2)
        with pytest.raises(DataError):
            Dataset(np.full((1, 2), 2.0), [0], "train", 2)

    def test_blobs_noise_free_points_sit_on_class_centres(self):
        blobs = synth_blobs(4, 10, 0.0, seed=1)
        assert len(blobs) == 40
        for k in range(4):
            points = blobs.inputs[blobs.labels == k]
            assert len(points) == 10
            assert np.ptp(points, axis=0).max() == 0.0
        np.testing.assert_allclose(blobs.inputs[blobs.labels == 0][0], [1.0, 0.5])

    def test_blobs_deterministic_and_images(self):
        a = synth_blobs(3, 5, 0.2, seed=7)
        b = synth_blobs(3, 5, 0.2, seed=7)
        assert a.fingerprint() == b.fingerprint()
        assert a.fingerprint() != synth_blobs(3, 5, 0.2, seed=8).fingerprint()

        images = synth_blobs(3, 5, 0.2, seed=7, image_size=4)
        assert images.input_shape == (1, 4, 4)
        np.testing.assert_allclose(images.inputs[:, 0, 0, 0], a.inputs[:, 0])
        np.testing.assert_allclose(images.inputs[:, 0, 3, 3], a.inputs[:, 1])

    def test_blobs_invalid(self):
        with pytest.raises(ConfigurationError):
            synth_blobs(1, 5, 0.1, seed=0)
        with pytest.raises(ConfigurationError):
            synth_blobs(3, 5, 0.1, seed=0, image_size=3)

    def test_batch_iter(self):
        dataset = synth_blobs(2, 5, 0.1, seed=0)
        batches = list(batch_iter(dataset, 4))
        assert [len(y) for _, y in batches] == [4, 4, 2]
        np.testing.assert_array_equal(np.concatenate([y for _, y in batches]), dataset.labels)

        shuffled = np.concatenate([y for _, y in batch_iter(dataset, 3, shuffle_seed=1, epoch=1)])
        assert sorted(shuffled.tolist()) == sorted(dataset.labels.tolist())
        again = np.concatenate([y for _, y in batch_iter(dataset, 3, shuffle_seed=1, epoch=1)])
        np.testing.assert_array_equal(shuffled, again)

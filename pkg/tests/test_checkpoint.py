"""Tests for the checkpoint container."""

import numpy as np
import pytest

from softdropconnect.core.layers import BatchNorm, Conv2d, Flatten, ForwardContext, Network
from softdropconnect.core.params import ParamStore
from softdropconnect.harness.checkpoint import (
    CHECKPOINT_FILE,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
    state_digest,
)
from softdropconnect.harness.config import build_config
from softdropconnect.utils.errors import DataError

CONFIG = build_config({"method": "none", "architecture": "mlp", "data": {"source": "blobs"}})


def _network(seed=0):
    store = ParamStore()
    layers = [Conv2d("conv", 1, 2, store, seed), BatchNorm("bn", 2, store), Flatten("flatten")]
    return Network(layers, store)


@pytest.fixture
def trained():
    """A network whose batchnorm running statistics have moved off their defaults."""
    model = _network()
    model(np.random.default_rng(0).random((4, 1, 4, 4)), ForwardContext(mode="train"))
    return model


class TestCheckpoint:
    """Test cases for encode/decode and save/load."""

    def test_round_trip_restores_state(self, trained, tmp_path):
        path = save_checkpoint(trained, CONFIG, tmp_path)
        assert path.name == CHECKPOINT_FILE

        checkpoint = load_checkpoint(path)
        assert checkpoint.config == CONFIG
        assert set(checkpoint.buffers) == {"bn.running_mean", "bn.running_var"}

        fresh = checkpoint.restore(_network(seed=1))
        assert state_digest(fresh) == state_digest(trained)
        x = np.random.default_rng(1).random((2, 1, 4, 4))
        np.testing.assert_array_equal(fresh(x).data, trained(x).data)

    def test_encoding_is_deterministic(self, trained):
        assert encode_checkpoint(trained, CONFIG) == encode_checkpoint(trained, CONFIG)

    def test_digest_tracks_buffers(self, trained):
        before = state_digest(trained)
        trained.layers[1].running_mean += 1.0
        assert state_digest(trained) != before

    def test_corrupt_bytes(self, trained):
        data = encode_checkpoint(trained, CONFIG)
        with pytest.raises(DataError):
            decode_checkpoint(b"XXXXX" + data[5:])
        with pytest.raises(DataError):
            decode_checkpoint(data[:-8])
        with pytest.raises(DataError):
            decode_checkpoint(data + b"\x00")
        with pytest.raises(DataError):
            decode_checkpoint(data[:7])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / CHECKPOINT_FILE)

"""Tests for training and evaluating one experiment."""

import json

import numpy as np
import pytest

from softdropconnect.harness.checkpoint import CHECKPOINT_FILE
from softdropconnect.harness.config import build_config
from softdropconnect.harness.trainer import (
    EPOCH_COLUMNS,
    METRIC_COLUMNS,
    Trainer,
    evaluate,
    load_datasets,
    run_experiment,
    summarize,
    train,
)
from softdropconnect.utils.errors import ConfigurationError, NumericalError


def _config(tmp_path, **fields):
    base = {
        "method": "none",
        "architecture": "mlp",
        "hidden_units": 16,
        "epochs": 2,
        "batch_size": 8,
        "adadelta_eps": 1e-2,
        "val_passes": 4,
        "test_passes": 6,
        "output_dir": str(tmp_path),
        "data": {
            "source": "blobs",
            "blobs": {"n_classes": 4, "n_per_class": 30, "val_per_class": 5, "test_per_class": 5},
        },
    }
    return build_config({**base, **fields})


class TestTraining:
    """Test cases for Trainer and train."""

    def test_separable_blobs_are_learned(self, tmp_path):
        config = _config(
            tmp_path,
            epochs=10,
            hidden_units=32,
            data={"source": "blobs", "blobs": {"n_classes": 4, "n_per_class": 50, "noise_sigma": 0.0}},
        )
        result = train(config)
        assert result.epochs[-1].train_accuracy >= 0.95
        assert result.epochs[-1].train_loss < result.epochs[0].train_loss
        assert result.epochs[-1].val_accuracy is not None

    def test_run_directory_contents(self, tmp_path):
        config = _config(tmp_path, method="sdc", p=0.5)
        result = train(config)
        run_dir = config.run_dir()
        assert result.run_dir == str(run_dir)
        assert (run_dir / CHECKPOINT_FILE).is_file()
        assert json.loads((run_dir / "config.json").read_text())["method"] == "sdc"
        lines = (run_dir / "epochs.csv").read_text().splitlines()
        assert lines[0] == EPOCH_COLUMNS
        assert len(lines) == 1 + config.epochs

    def test_same_config_same_checkpoint(self, tmp_path):
        config = _config(tmp_path, method="sdc_weak", p=0.5)
        datasets = load_datasets(config)
        a = train(config, datasets, run_dir=tmp_path / "a")
        b = train(config, datasets, run_dir=tmp_path / "b")
        assert a.state_digest == b.state_digest
        assert (tmp_path / "a" / CHECKPOINT_FILE).read_bytes() == (tmp_path / "b" / CHECKPOINT_FILE).read_bytes()

    def test_evaluation_settings_do_not_change_weights(self, tmp_path):
        config = _config(tmp_path, method="dropconnect", p=0.25)
        datasets = load_datasets(config)
        a = train(config, datasets, run_dir=tmp_path / "a")
        b = train(config.updated(val_passes=9, test_passes=50), datasets, run_dir=tmp_path / "b")
        assert a.state_digest == b.state_digest
        assert a.epochs[-1].val_accuracy is not None

    def test_bbb_records_kl(self, tmp_path):
        config = _config(tmp_path, method="bbb", epochs=1, bbb_train_samples=2, kl_schedule="geometric")
        result = train(config)
        assert result.epochs[0].kl is not None
        assert np.isfinite(result.epochs[0].train_loss)

    def test_non_finite_loss(self, tmp_path):
        config = _config(tmp_path)
        trainer = Trainer(config)
        weight = trainer.model.store["fc1.weight"]
        weight.data = np.full_like(weight.data, np.nan)
        with pytest.raises(NumericalError) as excinfo:
            trainer.train_epoch(1)
        assert excinfo.value.epoch == 1
        assert excinfo.value.batch == 0


class TestEvaluation:
    """Test cases for evaluate and run_experiment."""

    def test_outputs(self, tmp_path):
        config = _config(tmp_path, method="sdc", p=0.5)
        trained, result = run_experiment(config)
        run_dir = config.run_dir()

        for name in ("metrics.csv", "summaries.jsonl", "rejection.json", "histograms.json", "metadata.json"):
            assert (run_dir / name).is_file(), name
        metrics = (run_dir / "metrics.csv").read_text().splitlines()
        assert metrics[0] == METRIC_COLUMNS
        assert [m.split for m in result.metrics] == ["val", "test"]

        assert len(result.summaries) == 20
        assert all(s.num_passes == 6 for s in result.summaries)
        accuracy, mean_mi, _ = summarize(result.summaries, result.labels)
        assert result.metric("test").accuracy == pytest.approx(accuracy)
        assert result.metric("test").mean_mi_bits == pytest.approx(mean_mi)

        metadata = json.loads((run_dir / "metadata.json").read_text())
        assert metadata["state_digest"] == trained.state_digest
        assert metadata["test_passes"] == 6

    def test_evaluation_is_repeatable(self, tmp_path):
        config = _config(tmp_path, method="sdc_strong", p=0.25)
        trained = train(config)
        a = evaluate(config, trained.checkpoint)
        b = evaluate(config, trained.checkpoint)
        assert a.metrics == b.metrics

    def test_mismatched_method(self, tmp_path):
        config = _config(tmp_path, method="dropout", p=0.25)
        trained = train(config)
        with pytest.raises(ConfigurationError):
            evaluate(config.updated(method="dropconnect"), trained.checkpoint)

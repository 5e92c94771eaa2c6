"""Tests for multi-run comparison and sweeps."""

import json
from pathlib import Path

import pytest

from softdropconnect.harness.compare import (
    COMPARE_COLUMNS,
    compare_methods,
    sweep_configs,
)
from softdropconnect.harness.config import build_config
from softdropconnect.utils.errors import ConfigurationError


def _config(tmp_path, **fields):
    base = {
        "method": "none",
        "architecture": "mlp",
        "hidden_units": 8,
        "epochs": 1,
        "batch_size": 16,
        "val_passes": 3,
        "test_passes": 4,
        "output_dir": str(tmp_path),
        "data": {
            "source": "blobs",
            "blobs": {"n_classes": 3, "n_per_class": 20, "val_per_class": 4, "test_per_class": 4},
        },
    }
    return build_config({**base, **fields})


@pytest.fixture(scope="module")
def report_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("compare")


@pytest.fixture(scope="module")
def report(report_dir):
    configs = [
        _config(report_dir, method="sdc", p=0.5, seed=0),
        _config(report_dir, method="sdc", p=0.5, seed=1),
        _config(report_dir, method="none", seed=0),
    ]
    return compare_methods(configs)


class TestCompareMethods:
    """Test cases for compare_methods."""

    def test_rows(self, report):
        assert [row.label for row in report.rows] == ["sdc p=0.5", "none"]
        sdc = report.row("sdc p=0.5")
        assert sdc.seeds == [0, 1]
        assert sdc.accuracy_sd is not None and sdc.mi_sd is not None
        none = report.row("none")
        assert none.accuracy_sd is None
        assert none.mi_mean == pytest.approx(0.0, abs=1e-12)
        assert report.notes

    def test_rows_match_run_metrics(self, report):
        row = report.row("none")
        lines = (Path(row.run_dirs[0]) / "metrics.csv").read_text().splitlines()
        test_row = next(line.split(",") for line in lines if ",test," in line)
        assert row.accuracy_mean == pytest.approx(float(test_row[4]))
        assert row.mi_mean == pytest.approx(float(test_row[5]), abs=1e-12)

    def test_mi_ordering_and_bands(self, report):
        assert report.mi_ordering[0][0] == "none"
        assert report.mi_ordering[1] == ["sdc p=0.5"]
        band = next(b for b in report.validation_bands if b.label == "sdc p=0.5")
        assert band.epochs == [1]
        assert band.accuracy_min[0] <= band.accuracy_mean[0] <= band.accuracy_max[0]
        assert set(report.rejection) == {"sdc-p0.5-seed0", "sdc-p0.5-seed1", "none-seed0"}

    def test_files(self, report, report_dir):
        out = report_dir / "compare"
        lines = (out / "compare.csv").read_text().splitlines()
        assert lines[0] == COMPARE_COLUMNS
        assert len(lines) == 3
        assert json.loads((out / "compare.json").read_text())["rows"][0]["label"] == "sdc p=0.5"
        markdown = (out / "report.md").read_text()
        assert "seed 0: none < sdc p=0.5" in markdown
        assert "sdc-p0.5-seed1" in markdown

    def test_threads_give_same_report(self, report, report_dir, tmp_path):
        configs = [
            _config(report_dir, method="sdc", p=0.5, seed=0),
            _config(report_dir, method="sdc", p=0.5, seed=1),
            _config(report_dir, method="none", seed=0),
        ]
        threaded = compare_methods(configs, workers=3, output_dir=tmp_path)
        assert threaded.rows == report.rows
        assert (tmp_path / "report.md").is_file()

    def test_inconsistent_configs(self, tmp_path):
        a = _config(tmp_path, method="none")
        other_data = a.updated(data={"source": "blobs", "blobs": {"seed": 5}})
        with pytest.raises(ConfigurationError):
            compare_methods([a, other_data])
        with pytest.raises(ConfigurationError):
            compare_methods([a, a])
        with pytest.raises(ConfigurationError):
            compare_methods([])


class TestSweepConfigs:
    """Test cases for sweep_configs."""

    def test_full_grid(self, tmp_path):
        configs = sweep_configs(_config(tmp_path), seeds=[0, 1])
        assert len(configs) == 5 * 3 * 2
        assert {c.p for c in configs} == {0.05, 0.25, 0.5}
        assert len({c.run_name for c in configs}) == len(configs)

    def test_non_masking_methods(self, tmp_path):
        base = _config(tmp_path, method="sdc", p=0.5, sdc_bounds=[0.2, 0.8])
        configs = sweep_configs(base, methods=("none", "sdc", "sdc_weak"), p_values=(0.1,))
        assert [c.run_name for c in configs] == ["none-seed0", "sdc-p0.1-seed0", "sdc_weak-p0.1-seed0"]
        assert configs[1].sdc_bounds == (0.2, 0.8)
        assert configs[2].sdc_bounds is None

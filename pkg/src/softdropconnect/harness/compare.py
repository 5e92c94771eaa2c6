"""
Multi-run comparison of methods and leave-out rates.
"""

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from ..evaluation.rejection import RejectionCurve
from ..evaluation.report import render_comparison_report
from ..masking.masks import MASK_METHODS
from ..utils.errors import ConfigurationError
from ..utils.helpers import ResultWriter, setup_logging
from .config import SWEEP_P_VALUES, ExperimentConfig
from .trainer import EvaluationResult, TrainResult, load_datasets, run_experiment

logger = setup_logging(__name__)

COMPARE_COLUMNS = "method,p,seeds,accuracy_mean,accuracy_sd,mi_mean,mi_sd,entropy_mean"


def _mean_sd(values: Sequence[float]) -> Tuple[float, Optional[float]]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), (float(arr.std(ddof=1)) if arr.size > 1 else None)


class MethodRow(BaseModel):
    """Test metrics of one (method, p) pair over its seeds."""

    method: str
    p: Optional[float] = None
    label: str
    seeds: List[int]
    accuracy_mean: float
    accuracy_sd: Optional[float] = Field(default=None, description="Sample sd; None for a single seed")
    mi_mean: float
    mi_sd: Optional[float] = None
    entropy_mean: float
    run_dirs: List[str] = Field(default_factory=list)

    def csv_row(self) -> str:
        cells = [
            self.method,
            "" if self.p is None else f"{self.p:g}",
            str(len(self.seeds)),
            repr(self.accuracy_mean),
            "" if self.accuracy_sd is None else repr(self.accuracy_sd),
            repr(self.mi_mean),
            "" if self.mi_sd is None else repr(self.mi_sd),
            repr(self.entropy_mean),
        ]
        return ",".join(cells)


class ValidationBand(BaseModel):
    """Per-epoch validation accuracy range across the seeds of one method."""

    label: str
    epochs: List[int]
    accuracy_min: List[Optional[float]]
    accuracy_max: List[Optional[float]]
    accuracy_mean: List[Optional[float]]


class ComparisonReport(BaseModel):
    rows: List[MethodRow]
    mi_ordering: Dict[int, List[str]] = Field(
        default_factory=dict, description="Per seed: labels sorted by ascending test MI"
    )
    validation_bands: List[ValidationBand] = Field(default_factory=list)
    rejection: Dict[str, RejectionCurve] = Field(default_factory=dict, description="Keyed by run name")
    notes: List[str] = Field(default_factory=list)

    def row(self, label: str) -> MethodRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def _check_consistent(configs: Sequence[ExperimentConfig]) -> None:
    if not configs:
        raise ConfigurationError("compare needs at least one config")
    reference = configs[0].data
    for config in configs[1:]:
        if config.data != reference:
            raise ConfigurationError(
                f"config {config.run_name} uses different data than {configs[0].run_name}"
            )
    names = [c.run_name for c in configs]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ConfigurationError(f"duplicate runs in comparison: {duplicates}")


def _bands(label: str, trained: Sequence[TrainResult]) -> ValidationBand:
    n_epochs = max(len(t.epochs) for t in trained)
    lows, highs, means = [], [], []
    for index in range(n_epochs):
        values = [
            t.epochs[index].val_accuracy
            for t in trained
            if index < len(t.epochs) and t.epochs[index].val_accuracy is not None
        ]
        lows.append(min(values) if values else None)
        highs.append(max(values) if values else None)
        means.append(float(np.mean(values)) if values else None)
    return ValidationBand(
        label=label,
        epochs=list(range(1, n_epochs + 1)),
        accuracy_min=lows,
        accuracy_max=highs,
        accuracy_mean=means,
    )


def build_report(
    configs: Sequence[ExperimentConfig],
    results: Sequence[Tuple[TrainResult, EvaluationResult]],
) -> ComparisonReport:
    """Aggregate finished runs into a ComparisonReport."""
    groups: "OrderedDict[str, List[int]]" = OrderedDict()
    for index, config in enumerate(configs):
        groups.setdefault(config.label, []).append(index)

    rows, bands = [], []
    for label, indices in groups.items():
        tests = [results[i][1].metric("test") for i in indices]
        accuracy_mean, accuracy_sd = _mean_sd([t.accuracy for t in tests])
        mi_mean, mi_sd = _mean_sd([t.mean_mi_bits for t in tests])
        first = configs[indices[0]]
        rows.append(
            MethodRow(
                method=first.method,
                p=first.p,
                label=label,
                seeds=[configs[i].seed for i in indices],
                accuracy_mean=accuracy_mean,
                accuracy_sd=accuracy_sd,
                mi_mean=mi_mean,
                mi_sd=mi_sd,
                entropy_mean=float(np.mean([t.mean_entropy_bits for t in tests])),
                run_dirs=[results[i][1].run_dir for i in indices],
            )
        )
        bands.append(_bands(label, [results[i][0] for i in indices]))

    by_seed: Dict[int, List[Tuple[float, str]]] = {}
    for config, (_, evaluated) in zip(configs, results):
        by_seed.setdefault(config.seed, []).append((evaluated.metric("test").mean_mi_bits, config.label))
    ordering = {seed: [label for _, label in sorted(pairs)] for seed, pairs in sorted(by_seed.items())}

    notes = []
    if any(c.method == "none" for c in configs):
        notes.append("'none' runs are deterministic: their Monte-Carlo passes are identical and MI is 0.")
    return ComparisonReport(
        rows=rows,
        mi_ordering=ordering,
        validation_bands=bands,
        rejection={c.run_name: r[1].rejection for c, r in zip(configs, results)},
        notes=notes,
    )


def write_report(report: ComparisonReport, output_dir: Union[str, Path]) -> Path:
    """Write compare.csv, compare.json and report.md; returns the directory."""
    writer = ResultWriter.for_directory(Path(output_dir))
    writer.write_lines("compare.csv", (row.csv_row() for row in report.rows), header=COMPARE_COLUMNS)
    writer.write_json("compare.json", report.model_dump(mode="json"))
    writer.write_text("report.md", render_comparison_report(report))
    logger.info(f"Comparison of {len(report.rows)} methods written to {writer.directory}")
    return writer.directory


def compare_methods(
    configs: Sequence[ExperimentConfig],
    workers: int = 1,
    output_dir: Union[str, Path, None] = None,
) -> ComparisonReport:
    """
    Train and evaluate every config, then tabulate accuracy and MI per method.

    Args:
        configs: Runs sharing the same data; they differ in method, p or seed
        workers: Runs trained concurrently on separate threads
        output_dir: Where the comparison files go (default ``<output_dir>/compare``)

    Returns:
        ComparisonReport

    Raises:
        ConfigurationError: Configs disagree on the data, or a run appears twice
    """
    configs = list(configs)
    _check_consistent(configs)
    datasets = load_datasets(configs[0])
    logger.info(f"Comparing {len(configs)} runs with {workers} worker(s)")

    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run_experiment(c, datasets), configs))
    else:
        results = [run_experiment(c, datasets) for c in configs]

    report = build_report(configs, results)
    write_report(report, output_dir or Path(configs[0].output_dir) / "compare")
    return report


def sweep_configs(
    config: ExperimentConfig,
    methods: Sequence[str] = MASK_METHODS,
    p_values: Sequence[float] = SWEEP_P_VALUES,
    seeds: Optional[Sequence[int]] = None,
) -> List[ExperimentConfig]:
    """Copies of ``config`` for every (method, p, seed); non-masking methods get one entry per seed."""
    configs = []
    for seed in seeds if seeds is not None else [config.seed]:
        for method in methods:
            bounds = config.sdc_bounds if method == "sdc" else None
            if method in MASK_METHODS:
                for p in p_values:
                    configs.append(
                        config.updated(method=method, p=p, sdc_bounds=bounds, masked_layers=None, seed=seed)
                    )
            else:
                configs.append(
                    config.updated(method=method, p=None, sdc_bounds=None, masked_layers=None, seed=seed)
                )
    return configs


def sweep(
    config: ExperimentConfig,
    methods: Sequence[str] = MASK_METHODS,
    p_values: Sequence[float] = SWEEP_P_VALUES,
    seeds: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> ComparisonReport:
    """Leave-out-rate sweep feeding :func:`compare_methods` (written under ``<output_dir>/sweep``)."""
    configs = sweep_configs(config, methods, p_values, seeds)
    logger.info(f"Sweeping {len(methods)} methods over p in {list(p_values)}")
    return compare_methods(configs, workers=workers, output_dir=Path(config.output_dir) / "sweep")

"""
Training and evaluation of one experiment.

Random streams are derived from the config seed and a domain tag: weight
initialization, minibatch order, training masks/draws, validation passes and
test passes never share a stream, so evaluation settings cannot change the
trained weights.
"""

import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr

from .. import __version__
from ..bayes.elbo import elbo_minibatch, kl_weights
from ..core import ops
from ..core.layers import ForwardContext, Network
from ..core.rng import TEST, TRAIN, VAL, stream_seed
from ..core.tensor import Tape, no_grad
from ..data.datasets import Dataset, batch_iter, load_mnist_splits, synth_blobs
from ..evaluation.inference import mc_predict_batch
from ..evaluation.metrics import (
    ErrorSplit,
    HistogramAverage,
    PredictiveSummary,
    average_histograms,
    uncertainty_error_split,
)
from ..evaluation.rejection import RejectionCurve, default_thresholds, rejection_analysis
from ..utils.errors import ConfigurationError, NumericalError
from ..utils.helpers import ResultWriter, format_duration, setup_logging
from .checkpoint import CHECKPOINT_FILE, load_checkpoint, save_checkpoint, state_digest
from .config import ExperimentConfig, dump_config
from .model import build_model
from .optimizer import Adadelta

logger = setup_logging(__name__)

EPOCH_COLUMNS = "epoch,train_loss,train_accuracy,val_accuracy,val_mean_mi_bits,kl"
METRIC_COLUMNS = "method,p,seed,split,accuracy,mean_mi_bits,mean_entropy_bits"

RUN_NOTES = {
    "validation_accuracy": "popular-vote argmax over Monte-Carlo passes",
    "mean_mi": "mean over samples of per-sample mutual information (bits)",
    "val_split": "validation items are taken from the training file after val_offset",
}


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


class EpochRecord(BaseModel):
    """Per-epoch training and validation figures."""

    epoch: int = Field(ge=1)
    train_loss: float
    train_accuracy: float
    val_accuracy: Optional[float] = None
    val_mean_mi_bits: Optional[float] = None
    kl: Optional[float] = Field(default=None, description="Mean log q − log p per minibatch (bbb)")

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.epoch),
                _cell(self.train_loss),
                _cell(self.train_accuracy),
                _cell(self.val_accuracy),
                _cell(self.val_mean_mi_bits),
                _cell(self.kl),
            ]
        )


class MetricRecord(BaseModel):
    """One row of ``metrics.csv``."""

    method: str
    p: Optional[float] = None
    seed: int
    split: str
    accuracy: float
    mean_mi_bits: float
    mean_entropy_bits: float

    def csv_row(self) -> str:
        return ",".join(
            [
                self.method,
                "" if self.p is None else f"{self.p:g}",
                str(self.seed),
                self.split,
                _cell(self.accuracy),
                _cell(self.mean_mi_bits),
                _cell(self.mean_entropy_bits),
            ]
        )


class TrainResult(BaseModel):
    run_dir: str
    checkpoint: str
    state_digest: str
    parameters: int
    epochs: List[EpochRecord]


class EvaluationResult(BaseModel):
    """Metric tables of one evaluated run."""

    run_dir: str
    metrics: List[MetricRecord]
    rejection: RejectionCurve
    histograms: HistogramAverage
    error_split: ErrorSplit

    _summaries: List[PredictiveSummary] = PrivateAttr(default_factory=list)
    _labels: Optional[np.ndarray] = PrivateAttr(default=None)

    @property
    def summaries(self) -> List[PredictiveSummary]:
        """Per-sample test summaries."""
        return self._summaries

    @property
    def labels(self) -> Optional[np.ndarray]:
        return self._labels

    def metric(self, split: str) -> MetricRecord:
        for record in self.metrics:
            if record.split == split:
                return record
        raise KeyError(split)


def load_datasets(config: ExperimentConfig) -> Dict[str, Dataset]:
    """Train/val/test datasets described by ``config.data``."""
    data = config.data
    if data.source == "mnist":
        return load_mnist_splits(data.mnist_dir, data.split)
    blobs = data.blobs
    sizes = {"train": blobs.n_per_class, "val": blobs.val_per_class, "test": blobs.test_per_class}
    return {
        split: synth_blobs(
            blobs.n_classes, n, blobs.noise_sigma, blobs.seed + offset, blobs.image_size, split=split
        )
        for offset, (split, n) in enumerate(sizes.items())
    }


def summarize(
    summaries: Sequence[PredictiveSummary], labels: np.ndarray
) -> Tuple[float, float, float]:
    """(popular-vote accuracy, mean MI, mean predictive entropy)."""
    votes = np.array([s.popular_class for s in summaries])
    accuracy = float(np.mean(votes == labels)) if len(labels) else 0.0
    mean_mi = float(np.mean([s.mutual_information for s in summaries])) if summaries else 0.0
    mean_entropy = float(np.mean([s.predictive_entropy for s in summaries])) if summaries else 0.0
    return accuracy, mean_mi, mean_entropy


def eval_accuracy(model: Network, dataset: Dataset, batch_size: int = 100) -> float:
    """Deterministic-mode accuracy (no masks, posterior means, running statistics)."""
    if len(dataset) == 0:
        return 0.0
    correct = 0
    ctx = ForwardContext(mode="eval")
    with no_grad():
        for inputs, labels in batch_iter(dataset, batch_size):
            correct += int((model.forward(inputs, ctx).data.argmax(axis=1) == labels).sum())
    return correct / len(dataset)


class Trainer:
    """
    Trains the network of one ExperimentConfig with Adadelta.

    Deterministic and masked models minimize the mean cross-entropy of each
    minibatch (one mask draw per step); Bayes-by-Backprop models minimize the
    Monte-Carlo minibatch ELBO.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        datasets: Optional[Dict[str, Dataset]] = None,
        run_dir: Optional[Path] = None,
    ):
        """
        Initialize the trainer.

        Args:
            config: Experiment to run
            datasets: Pre-loaded splits (loaded from ``config.data`` when omitted)
            run_dir: Output directory (defaults to ``config.run_dir()``)
        """
        self.config = config
        self.datasets = datasets if datasets is not None else load_datasets(config)
        train = self.datasets["train"]
        if len(train) == 0:
            raise ConfigurationError("training split is empty")
        self.model = build_model(config, train.input_shape, train.n_classes)
        self.optimizer = Adadelta(
            self.model.store, lr=config.learning_rate, rho=config.adadelta_rho, eps=config.adadelta_eps
        )
        self.run_dir = Path(run_dir) if run_dir else config.run_dir()
        self.writer = ResultWriter.for_directory(self.run_dir)
        self.train_seed = stream_seed(config.seed, TRAIN)
        self.step = 0

    def _batch_loss(self, inputs: np.ndarray, labels: np.ndarray, kl_weight: float) -> Tuple[float, Optional[float]]:
        with Tape() as tape:
            if self.config.method == "bbb":
                breakdown = elbo_minibatch(
                    self.model,
                    (inputs, labels),
                    self.config.bbb_train_samples,
                    kl_weight,
                    master_seed=self.train_seed,
                    pass_offset=self.step * self.config.bbb_train_samples,
                )
                loss, kl = breakdown.objective, breakdown.kl
            else:
                ctx = ForwardContext(mode="train", master_seed=self.train_seed, pass_index=self.step)
                probs = ops.softmax_logits(self.model.forward(inputs, ctx))
                loss, kl = ops.cross_entropy(probs, labels), None
        value = loss.item()
        if not np.isfinite(value):
            return value, kl
        tape.backward(loss)
        return value, kl

    def train_epoch(self, epoch: int) -> Tuple[float, Optional[float]]:
        """Run one epoch; returns (mean loss, mean kl or None)."""
        train = self.datasets["train"]
        n_batches = -(-len(train) // self.config.batch_size)
        weights = kl_weights(n_batches, self.config.kl_schedule)
        losses, kls = [], []
        for batch, (inputs, labels) in enumerate(
            batch_iter(train, self.config.batch_size, shuffle_seed=self.config.seed, epoch=epoch)
        ):
            self.optimizer.zero_grad()
            loss, kl = self._batch_loss(inputs, labels, weights[batch])
            if not np.isfinite(loss):
                logger.error(f"Non-finite loss at epoch {epoch}, batch {batch}")
                raise NumericalError("non-finite training loss", epoch=epoch, batch=batch)
            self.optimizer.step(epoch=epoch, batch=batch)
            self.step += 1
            losses.append(loss)
            if kl is not None:
                kls.append(kl)
            logger.debug(f"epoch {epoch} batch {batch}: loss {loss:.5f}")
        return float(np.mean(losses)), (float(np.mean(kls)) if kls else None)

    def validate(self, epoch: int) -> Tuple[Optional[float], Optional[float]]:
        """Popular-vote accuracy and mean MI over the validation split."""
        val = self.datasets.get("val")
        if val is None or len(val) == 0:
            return None, None
        passes = self.config.val_passes if self.model.is_stochastic else 1
        summaries = mc_predict_batch(
            self.model,
            val.inputs,
            passes,
            stream_seed(self.config.seed, VAL, epoch),
            batch_size=self.config.eval_batch_size,
            workers=self.config.eval_workers,
        )
        accuracy, mean_mi, _ = summarize(summaries, val.labels)
        return accuracy, mean_mi

    def fit(self) -> TrainResult:
        """
        Train for ``config.epochs`` epochs and write the run directory.

        Returns:
            TrainResult with per-epoch records and the checkpoint location
        """
        config = self.config
        logger.info(
            f"Training {config.run_name}: {config.architecture}, "
            f"{self.model.store.num_parameters()} parameters, {config.epochs} epochs"
        )
        self.writer.write_text("config.json", dump_config(config))
        records: List[EpochRecord] = []
        for epoch in range(1, config.epochs + 1):
            started = time.perf_counter()
            loss, kl = self.train_epoch(epoch)
            train_accuracy = eval_accuracy(self.model, self.datasets["train"], config.eval_batch_size)
            val_accuracy, val_mi = self.validate(epoch)
            record = EpochRecord(
                epoch=epoch,
                train_loss=loss,
                train_accuracy=train_accuracy,
                val_accuracy=val_accuracy,
                val_mean_mi_bits=val_mi,
                kl=kl,
            )
            records.append(record)
            logger.info(
                f"[{config.run_name}] epoch {epoch}/{config.epochs}: loss {loss:.4f}, "
                f"train acc {train_accuracy:.4f}, val acc {_cell(val_accuracy) or '-'} "
                f"({format_duration(time.perf_counter() - started)})"
            )

        self.writer.write_lines("epochs.csv", (r.csv_row() for r in records), header=EPOCH_COLUMNS)
        checkpoint = save_checkpoint(self.model, config, self.run_dir)
        return TrainResult(
            run_dir=str(self.run_dir),
            checkpoint=str(checkpoint),
            state_digest=state_digest(self.model),
            parameters=self.model.store.num_parameters(),
            epochs=records,
        )


def train(
    config: ExperimentConfig,
    datasets: Optional[Dict[str, Dataset]] = None,
    run_dir: Optional[Path] = None,
) -> TrainResult:
    """Train ``config`` and write checkpoint, epochs.csv and config.json."""
    return Trainer(config, datasets, run_dir).fit()


def evaluate(
    config: ExperimentConfig,
    checkpoint: Union[str, Path, None] = None,
    datasets: Optional[Dict[str, Dataset]] = None,
    run_dir: Optional[Path] = None,
) -> EvaluationResult:
    """
    Monte-Carlo evaluation of a trained run.

    Validation uses ``val_passes`` and test ``test_passes`` passes per sample.
    Writes metrics.csv, summaries.jsonl (test), rejection.json,
    histograms.json and metadata.json.

    Args:
        config: Evaluation settings (architecture must match the checkpoint)
        checkpoint: Checkpoint file (defaults to the run directory's)
        datasets: Pre-loaded splits
        run_dir: Output directory (defaults to ``config.run_dir()``)

    Returns:
        EvaluationResult
    """
    run_dir = Path(run_dir) if run_dir else config.run_dir()
    saved = load_checkpoint(Path(checkpoint) if checkpoint else run_dir / CHECKPOINT_FILE)
    for field in ("method", "p", "architecture", "hidden_units", "masked_layers", "sdc_bounds"):
        if getattr(saved.config, field) != getattr(config, field):
            raise ConfigurationError(
                f"checkpoint was trained with {field}={getattr(saved.config, field)!r}, "
                f"config has {getattr(config, field)!r}"
            )
    datasets = datasets if datasets is not None else load_datasets(config)
    test = datasets["test"]
    model = saved.restore(build_model(saved.config, test.input_shape, test.n_classes))
    writer = ResultWriter.for_directory(run_dir)

    records: List[MetricRecord] = []
    test_summaries: List[PredictiveSummary] = []
    for split, passes, domain in (("val", config.val_passes, VAL), ("test", config.test_passes, TEST)):
        dataset = datasets.get(split)
        if dataset is None or len(dataset) == 0:
            continue
        summaries = mc_predict_batch(
            model,
            dataset.inputs,
            passes,
            stream_seed(config.seed, domain),
            batch_size=config.eval_batch_size,
            workers=config.eval_workers,
        )
        accuracy, mean_mi, mean_entropy = summarize(summaries, dataset.labels)
        records.append(
            MetricRecord(
                method=config.method,
                p=config.p,
                seed=config.seed,
                split=split,
                accuracy=accuracy,
                mean_mi_bits=mean_mi,
                mean_entropy_bits=mean_entropy,
            )
        )
        logger.info(f"[{config.run_name}] {split}: accuracy {accuracy:.4f}, mean MI {mean_mi:.4f} bits")
        if split == "test":
            test_summaries = summaries

    curve = rejection_analysis(test_summaries, test.labels, default_thresholds(config.rejection_points))
    histograms = average_histograms(test_summaries, config.histogram_bins)
    split_stats = uncertainty_error_split(test_summaries, test.labels)

    writer.write_lines("metrics.csv", (r.csv_row() for r in records), header=METRIC_COLUMNS)
    writer.write_lines("summaries.jsonl", (s.model_dump_json() for s in test_summaries))
    writer.write_json("rejection.json", curve.model_dump())
    writer.write_json("histograms.json", {"average": histograms.model_dump(), "error_split": split_stats.model_dump()})
    writer.write_json(
        "metadata.json",
        {
            "run_name": config.run_name,
            "method": config.method,
            "p": config.p,
            "seed": config.seed,
            "val_passes": config.val_passes,
            "test_passes": config.test_passes,
            "state_digest": state_digest(model),
            "parameters": model.store.num_parameters(),
            "version": __version__,
            "notes": RUN_NOTES,
        },
    )

    result = EvaluationResult(
        run_dir=str(run_dir),
        metrics=records,
        rejection=curve,
        histograms=histograms,
        error_split=split_stats,
    )
    result._summaries = test_summaries
    result._labels = test.labels
    return result


def run_experiment(config: ExperimentConfig, datasets: Optional[Dict[str, Dataset]] = None) -> Tuple[TrainResult, EvaluationResult]:
    """Train then evaluate one config."""
    datasets = datasets if datasets is not None else load_datasets(config)
    trained = train(config, datasets)
    return trained, evaluate(config, trained.checkpoint, datasets, Path(trained.run_dir))

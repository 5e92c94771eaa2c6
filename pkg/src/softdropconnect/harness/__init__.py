"""Experiment harness: configuration, models, training, evaluation and comparison."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint, state_digest
from .compare import ComparisonReport, MethodRow, compare_methods, sweep
from .config import ExperimentConfig, dump_config, load_config, parse_config_text
from .model import build_mlp, build_mnist_model, build_model
from .optimizer import Adadelta, AdadeltaState, adadelta_step
from .selftest import gradient_suite, run_selftest
from .trainer import EvaluationResult, TrainResult, Trainer, evaluate, run_experiment, train

__all__ = [
    "ExperimentConfig",
    "load_config",
    "dump_config",
    "parse_config_text",
    "build_model",
    "build_mnist_model",
    "build_mlp",
    "Adadelta",
    "AdadeltaState",
    "adadelta_step",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "state_digest",
    "Trainer",
    "TrainResult",
    "EvaluationResult",
    "train",
    "evaluate",
    "run_experiment",
    "ComparisonReport",
    "MethodRow",
    "compare_methods",
    "sweep",
    "run_selftest",
    "gradient_suite",
]

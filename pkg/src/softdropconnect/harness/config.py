"""
Experiment configuration.

Configs are read from JSON, YAML, or flat ``key=value`` files (dotted keys
address nested fields, values are JSON-decoded when possible) and written
back as canonical JSON.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..bayes.variational import ScaleMixturePrior
from ..data.datasets import SplitSpec
from ..masking.masks import MASK_METHODS, MaskSpec, make_spec
from ..utils.errors import ConfigurationError
from ..utils.helpers import setup_logging

logger = setup_logging(__name__)

Method = Literal["none", "dropout", "dropconnect", "sdc", "sdc_strong", "sdc_weak", "bbb"]
METHODS: Tuple[str, ...] = ("none",) + MASK_METHODS + ("bbb",)
SWEEP_P_VALUES: Tuple[float, ...] = (0.05, 0.25, 0.5)

FULL_EPOCHS = 500
FULL_LEARNING_RATE = 0.001


class BlobsConfig(BaseModel):
    """Synthetic blob problem used instead of MNIST for fast runs."""

    model_config = ConfigDict(extra="forbid")

    n_classes: int = Field(default=4, ge=2)
    n_per_class: int = Field(default=200, ge=1)
    val_per_class: int = Field(default=50, ge=1)
    test_per_class: int = Field(default=50, ge=1)
    noise_sigma: float = Field(default=0.1, ge=0.0)
    seed: int = Field(default=0, ge=0)
    image_size: Optional[int] = Field(default=None, ge=2)


class DataConfig(BaseModel):
    """Where the data comes from and how it is split."""

    model_config = ConfigDict(extra="forbid")

    source: Literal["mnist", "blobs"] = "mnist"
    mnist_dir: Optional[str] = None
    split: SplitSpec = Field(default_factory=SplitSpec)
    blobs: BlobsConfig = Field(default_factory=BlobsConfig)

    @model_validator(mode="after")
    def check_source(self) -> "DataConfig":
        if self.source == "mnist" and not self.mnist_dir:
            raise ValueError("data.mnist_dir is required when data.source is 'mnist'")
        return self


class ExperimentConfig(BaseModel):
    """One training/evaluation run."""

    model_config = ConfigDict(extra="forbid")

    method: Method
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0, description="Leave-out rate")
    sdc_bounds: Optional[Tuple[float, float]] = None
    masked_layers: Optional[List[str]] = Field(
        default=None, description="Layers to mask; architecture default when unset"
    )

    architecture: Literal["mnist_cnn", "mlp"] = "mnist_cnn"
    hidden_units: int = Field(default=64, ge=1, description="Width of the mlp hidden layers")

    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=1.0, gt=0.0)
    adadelta_rho: float = Field(default=0.9, gt=0.0, lt=1.0)
    adadelta_eps: float = Field(default=1e-6, gt=0.0)

    bbb_train_samples: int = Field(default=5, ge=1)
    kl_schedule: Literal["uniform", "geometric"] = "uniform"
    prior: ScaleMixturePrior = Field(default_factory=ScaleMixturePrior)
    rho_init: float = -5.0

    val_passes: int = Field(default=25, ge=1)
    test_passes: int = Field(default=100, ge=1)
    eval_batch_size: int = Field(default=100, ge=1)
    eval_workers: int = Field(default=1, ge=1)
    histogram_bins: int = Field(default=10, ge=1)
    rejection_points: int = Field(default=101, ge=2)

    seed: int = Field(default=0, ge=0)
    data: DataConfig
    output_dir: str = "runs"

    @model_validator(mode="after")
    def check_method_fields(self) -> "ExperimentConfig":
        if self.method in MASK_METHODS:
            if self.p is None:
                raise ValueError(f"method '{self.method}' requires p")
            make_spec(self.method, self.p, self.sdc_bounds)
            if self.p >= 1.0 and self.method in ("dropout", "dropconnect"):
                raise ValueError(f"{self.method} with p=1 removes every connection")
        elif self.p is not None:
            raise ValueError(f"method '{self.method}' does not take p")
        if self.sdc_bounds is not None and self.method != "sdc":
            raise ValueError("sdc_bounds only applies to method 'sdc'")
        return self

    def mask_spec(self) -> Optional[MaskSpec]:
        if self.method not in MASK_METHODS:
            return None
        return make_spec(self.method, self.p, self.sdc_bounds)

    @property
    def run_name(self) -> str:
        """Directory-safe identifier, e.g. ``sdc_weak-p0.5-seed0``."""
        p_part = f"-p{self.p:g}" if self.p is not None else ""
        return f"{self.method}{p_part}-seed{self.seed}"

    @property
    def label(self) -> str:
        """Method and p without the seed."""
        return self.method if self.p is None else f"{self.method} p={self.p:g}"

    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_name

    def updated(self, **changes: Any) -> "ExperimentConfig":
        """Validated copy with top-level fields replaced."""
        return build_config({**self.model_dump(mode="json"), **changes})

    def full_scale(self) -> "ExperimentConfig":
        """Copy with the full-scale protocol: 500 epochs, lr 0.001, 50k/10k/10k MNIST splits."""
        data = self.data.model_copy(update={"split": SplitSpec.full()})
        return self.updated(
            epochs=FULL_EPOCHS,
            learning_rate=FULL_LEARNING_RATE,
            data=data.model_dump(mode="json"),
        )


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a nested mapping, reporting problems as configuration errors."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration: {e}") from e


def _decode(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_flat(text: str) -> Dict[str, Any]:
    """
    Parse ``key=value`` lines into a nested mapping.

    Blank lines and ``#`` comments are skipped; ``a.b=1`` sets ``{"a": {"b": 1}}``.
    """
    nested: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {number}: expected key=value, got '{line}'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"line {number}: empty key")
        target = nested
        parts = key.split(".")
        for part in parts[:-1]:
            child = target.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"line {number}: '{part}' is both a value and a section")
            target = child
        target[parts[-1]] = _decode(raw)
    return nested


def parse_config_text(text: str, fmt: str = "flat") -> ExperimentConfig:
    """Parse config text in ``json``, ``yaml`` or ``flat`` form."""
    try:
        if fmt == "json":
            data = json.loads(text)
        elif fmt == "yaml":
            data = yaml.safe_load(text)
        elif fmt == "flat":
            data = parse_flat(text)
        else:
            raise ConfigurationError(f"unknown config format: {fmt}")
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigurationError(f"cannot parse {fmt} config: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping")
    return build_config(data)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load a config file; the format follows the suffix (.json, .yaml/.yml, anything else flat).

    Args:
        path: Config file

    Returns:
        Validated ExperimentConfig
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    suffix = path.suffix.lower()
    fmt = "json" if suffix == ".json" else "yaml" if suffix in (".yaml", ".yml") else "flat"
    config = parse_config_text(path.read_text(encoding="utf-8"), fmt)
    logger.debug(f"Loaded {fmt} config {path}: {config.run_name}")
    return config


def dump_config(config: ExperimentConfig) -> str:
    """Canonical JSON (sorted keys, two-space indent)."""
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"

"""
Deterministic layers and the sequential network container.

Layers own no randomness of their own: stochastic layers (masking and
variational ones) draw from the generator the :class:`ForwardContext` derives
for their layer index, so a forward pass is fully determined by the context.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..utils.errors import ConfigurationError
from ..utils.helpers import setup_logging
from . import ops
from .params import ParamStore
from .rng import INIT, SeedLineage, derive_seed, lineage_rng, name_key
from .tensor import Tensor, as_tensor

logger = setup_logging(__name__)

MODES = ("train", "eval", "mc")


@dataclass
class ForwardContext:
    """
    Everything a forward pass depends on besides inputs and parameters.

    ``train`` samples masks/weights and uses batch statistics, ``mc`` samples
    masks/weights but uses running statistics, ``eval`` is fully deterministic
    (no masks, posterior means).
    """

    mode: str = "eval"
    master_seed: int = 0
    pass_index: int = 0
    collect_kl: bool = False
    log_q: List[Tensor] = field(default_factory=list)
    log_prior: List[Tensor] = field(default_factory=list)
    # Weight-shaped draws keyed by layer index; they depend only on the lineage.
    noise_cache: Dict[int, object] = field(default_factory=dict)
    # Dataset index of the first row of the current batch; keys activation masks.
    sample_offset: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown forward mode '{self.mode}', expected one of {MODES}")

    @property
    def stochastic(self) -> bool:
        return self.mode in ("train", "mc")

    @property
    def batchnorm_mode(self) -> str:
        return "train" if self.mode == "train" else "eval"

    def lineage(self, layer_index: int) -> SeedLineage:
        return SeedLineage(
            master_seed=self.master_seed, pass_index=self.pass_index, layer_index=layer_index
        )

    def rng(self, layer_index: int) -> np.random.Generator:
        return lineage_rng(self.lineage(layer_index))


def init_rng(seed: int, name: str) -> np.random.Generator:
    """Initialization stream of one named layer."""
    return derive_seed(seed, INIT, name_key(name))


def fan_in_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=tuple(shape))


class Layer:
    """Base layer; ``layer_index`` is assigned by the enclosing network."""

    stochastic = False

    def __init__(self, name: str):
        self.name = name
        self.layer_index = 0

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        raise NotImplementedError

    def __call__(self, x, ctx: Optional[ForwardContext] = None) -> Tensor:
        return self.forward(as_tensor(x), ctx or ForwardContext())

    def buffers(self) -> Dict[str, np.ndarray]:
        """Non-trainable state saved with checkpoints."""
        return {}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class Dense(Layer):
    """Fully-connected layer with ``weight [out,in]`` and ``bias [out]``."""

    def __init__(self, name: str, in_features: int, out_features: int, store: ParamStore, seed: int = 0):
        super().__init__(name)
        self.in_features = in_features
        self.out_features = out_features
        rng = init_rng(seed, name)
        self.weight = store.add(f"{name}.weight", fan_in_uniform(rng, (out_features, in_features), in_features))
        self.bias = store.add(f"{name}.bias", fan_in_uniform(rng, (out_features,), in_features))

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return ops.dense(x, self.weight, self.bias)


class Conv2d(Layer):
    """3×3 (by default) same-padding convolution with per-channel bias."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        store: ParamStore,
        seed: int = 0,
        kernel_size: int = 3,
    ):
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        fan_in = in_channels * kernel_size * kernel_size
        rng = init_rng(seed, name)
        self.weight = store.add(
            f"{name}.weight",
            fan_in_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in),
        )
        self.bias = store.add(f"{name}.bias", fan_in_uniform(rng, (out_channels,), fan_in))

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias)


class BatchNorm(Layer):
    """Per-channel batch normalization with running statistics."""

    def __init__(self, name: str, channels: int, store: ParamStore):
        super().__init__(name)
        self.channels = channels
        self.gamma = store.add(f"{name}.gamma", np.ones(channels))
        self.beta = store.add(f"{name}.beta", np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return ops.batchnorm(
            x, self.gamma, self.beta, self.running_mean, self.running_var, mode=ctx.batchnorm_mode
        )

    def buffers(self) -> Dict[str, np.ndarray]:
        return {f"{self.name}.running_mean": self.running_mean, f"{self.name}.running_var": self.running_var}


class ReLU(Layer):
    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return ops.relu(x)


class MaxPool2d(Layer):
    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return ops.maxpool2d(x, 2, 2)


class Flatten(Layer):
    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        return ops.flatten(x)


class Network:
    """
    Ordered stack of layers sharing one :class:`ParamStore`.

    ``forward(x, ctx, start, stop)`` runs a slice of the stack, which lets
    callers compute the deterministic prefix once and replay only the
    stochastic suffix for every Monte-Carlo pass.
    """

    def __init__(self, layers: Sequence[Layer], store: ParamStore, architecture: str = "custom"):
        names = [layer.name for layer in layers]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"layer names must be unique: {names}")
        self.layers = list(layers)
        self.store = store
        self.architecture = architecture
        for index, layer in enumerate(self.layers):
            layer.layer_index = index

    def __len__(self) -> int:
        return len(self.layers)

    def forward(
        self,
        x,
        ctx: Optional[ForwardContext] = None,
        start: int = 0,
        stop: Optional[int] = None,
    ) -> Tensor:
        ctx = ctx or ForwardContext()
        out = as_tensor(x)
        for layer in self.layers[start:stop]:
            out = layer.forward(out, ctx)
        return out

    __call__ = forward

    @property
    def stochastic_start(self) -> int:
        """Index of the first layer that draws randomness (``len`` if none)."""
        for index, layer in enumerate(self.layers):
            if layer.stochastic:
                return index
        return len(self.layers)

    @property
    def is_stochastic(self) -> bool:
        return self.stochastic_start < len(self.layers)

    @property
    def parameters(self) -> ParamStore:
        return self.store

    def buffers(self) -> Dict[str, np.ndarray]:
        merged: Dict[str, np.ndarray] = {}
        for layer in self.layers:
            merged.update(layer.buffers())
        return dict(sorted(merged.items()))

    def load_buffers(self, state: Dict[str, np.ndarray]) -> None:
        current = self.buffers()
        if set(current) != set(state):
            raise ConfigurationError(
                f"buffer mismatch: expected {sorted(current)}, got {sorted(state)}"
            )
        for key, values in state.items():
            np.copyto(current[key], np.asarray(values, dtype=np.float64))

    def summary(self) -> List[Dict[str, object]]:
        """One row per layer: name, type, parameter count."""
        rows = []
        for layer in self.layers:
            count = sum(t.size for path, t in self.store.items() if path.startswith(f"{layer.name}."))
            rows.append({"name": layer.name, "type": type(layer).__name__, "parameters": count})
        return rows

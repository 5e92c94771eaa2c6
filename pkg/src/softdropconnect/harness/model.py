"""
Model zoo.

``mnist_cnn``: two conv blocks of [conv3×3 → batchnorm → relu] ×2 → maxpool 2/2
with 32 and 64 kernels, then fc 3136→1024 → relu → fc 1024→10.

``mlp``: (flatten) → fc in→hidden → relu → fc hidden→K.

Masking sites: Dropout masks activations after a block (``block1``,
``block2``) or after ``fc1``'s activation; the connect-style methods mask the
weights of the named layers (``fc1``, ``fc2`` or any conv such as
``block1.conv1``). Bayes-by-Backprop replaces the fully-connected layers with
variational ones.
"""

from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from ..bayes.layers import DEFAULT_RHO_INIT, BayesDense
from ..bayes.variational import ScaleMixturePrior
from ..core.layers import BatchNorm, Conv2d, Dense, Flatten, Layer, MaxPool2d, Network, ReLU
from ..core.params import ParamStore
from ..masking.layers import Dropout, MaskedConv2d, MaskedDense
from ..masking.masks import MASK_METHODS, MaskSpec, make_spec
from ..utils.errors import ConfigurationError
from ..utils.helpers import setup_logging
from .config import METHODS, ExperimentConfig

logger = setup_logging(__name__)

MNIST_INPUT_SHAPE = (1, 28, 28)
MNIST_CLASSES = 10
BLOCK_CHANNELS = (32, 64)
FC_HIDDEN = 1024


def default_masked_layers(method: str, architecture: str = "mnist_cnn") -> List[str]:
    if method == "dropout":
        return ["block1", "block2"] if architecture == "mnist_cnn" else ["fc1"]
    if method in MASK_METHODS:
        return ["fc1", "fc2"]
    return []


class _Builder:
    """Accumulates layers, choosing the masked or variational variant per site."""

    def __init__(
        self,
        method: str,
        spec: Optional[MaskSpec],
        masked: Sequence[str],
        seed: int,
        prior: Optional[ScaleMixturePrior],
        rho_init: float,
    ):
        self.method = method
        self.spec = spec
        self.masked: Set[str] = set(masked)
        self.used: Set[str] = set()
        self.seed = seed
        self.prior = prior
        self.rho_init = rho_init
        self.store = ParamStore()
        self.layers: List[Layer] = []

    def _masks_weights(self, name: str) -> bool:
        if self.spec is None or self.method == "dropout" or name not in self.masked:
            return False
        self.used.add(name)
        return True

    def conv(self, name: str, c_in: int, c_out: int) -> None:
        if self._masks_weights(name):
            self.layers.append(MaskedConv2d(name, c_in, c_out, self.store, self.spec, self.seed))
        else:
            self.layers.append(Conv2d(name, c_in, c_out, self.store, self.seed))

    def dense(self, name: str, n_in: int, n_out: int) -> None:
        if self.method == "bbb":
            self.layers.append(
                BayesDense(name, n_in, n_out, self.store, self.prior, self.rho_init, self.seed)
            )
        elif self._masks_weights(name):
            self.layers.append(MaskedDense(name, n_in, n_out, self.store, self.spec, self.seed))
        else:
            self.layers.append(Dense(name, n_in, n_out, self.store, self.seed))

    def dropout_site(self, site: str) -> None:
        if self.method == "dropout" and site in self.masked:
            self.used.add(site)
            self.layers.append(Dropout(f"{site}.dropout", self.spec))

    def add(self, layer: Layer) -> None:
        self.layers.append(layer)

    def finish(self, architecture: str) -> Network:
        unused = self.masked - self.used
        if unused:
            raise ConfigurationError(
                f"masked_layers {sorted(unused)} are not masking sites of {architecture} for {self.method}"
            )
        network = Network(self.layers, self.store, architecture=architecture)
        logger.debug(
            f"Built {architecture} ({self.method}): {len(network)} layers, "
            f"{self.store.num_parameters()} parameters"
        )
        return network


def _resolve(method, p, sdc_bounds, masked_layers, architecture) -> Tuple[Optional[MaskSpec], List[str]]:
    if method not in METHODS:
        raise ConfigurationError(f"unknown method '{method}', expected one of {METHODS}")
    if method in MASK_METHODS and p is None:
        raise ConfigurationError(f"method '{method}' requires p")
    spec = make_spec(method, p, sdc_bounds) if method in MASK_METHODS else None
    masked = list(masked_layers) if masked_layers is not None else default_masked_layers(method, architecture)
    if method not in MASK_METHODS and masked_layers:
        raise ConfigurationError(f"method '{method}' does not mask layers")
    return spec, masked


def build_mnist_model(
    method: str,
    p: Optional[float] = None,
    seed: int = 0,
    sdc_bounds: Optional[Sequence[float]] = None,
    masked_layers: Optional[Sequence[str]] = None,
    prior: Optional[ScaleMixturePrior] = None,
    rho_init: float = DEFAULT_RHO_INIT,
) -> Network:
    """
    Build the MNIST network for a method.

    Args:
        method: none | dropout | dropconnect | sdc | sdc_strong | sdc_weak | bbb
        p: Leave-out rate (masking methods only)
        seed: Initialization seed
        sdc_bounds: Custom uniform bounds for generic sdc
        masked_layers: Masking sites (defaults per method)
        prior: Scale-mixture prior for bbb
        rho_init: Initial rho for bbb

    Returns:
        Network mapping [N,1,28,28] to logits [N,10]
    """
    spec, masked = _resolve(method, p, sdc_bounds, masked_layers, "mnist_cnn")
    builder = _Builder(method, spec, masked, seed, prior, rho_init)

    c_in = MNIST_INPUT_SHAPE[0]
    for block, c_out in enumerate(BLOCK_CHANNELS, start=1):
        for conv in (1, 2):
            builder.conv(f"block{block}.conv{conv}", c_in, c_out)
            builder.add(BatchNorm(f"block{block}.bn{conv}", c_out, builder.store))
            builder.add(ReLU(f"block{block}.relu{conv}"))
            c_in = c_out
        builder.add(MaxPool2d(f"block{block}.pool"))
        builder.dropout_site(f"block{block}")

    side = MNIST_INPUT_SHAPE[1] // 4
    builder.add(Flatten("flatten"))
    builder.dense("fc1", c_in * side * side, FC_HIDDEN)
    builder.add(ReLU("fc1_relu"))
    builder.dropout_site("fc1")
    builder.dense("fc2", FC_HIDDEN, MNIST_CLASSES)
    return builder.finish("mnist_cnn")


def build_mlp(
    method: str,
    input_shape: Sequence[int],
    n_classes: int,
    p: Optional[float] = None,
    hidden_units: int = 64,
    seed: int = 0,
    sdc_bounds: Optional[Sequence[float]] = None,
    masked_layers: Optional[Sequence[str]] = None,
    prior: Optional[ScaleMixturePrior] = None,
    rho_init: float = DEFAULT_RHO_INIT,
) -> Network:
    """Two-layer perceptron over flattened inputs."""
    spec, masked = _resolve(method, p, sdc_bounds, masked_layers, "mlp")
    builder = _Builder(method, spec, masked, seed, prior, rho_init)
    n_in = int(np.prod(input_shape))
    if len(input_shape) > 1:
        builder.add(Flatten("flatten"))
    builder.dense("fc1", n_in, hidden_units)
    builder.add(ReLU("fc1_relu"))
    builder.dropout_site("fc1")
    builder.dense("fc2", hidden_units, n_classes)
    return builder.finish("mlp")


def build_model(config: ExperimentConfig, input_shape: Sequence[int], n_classes: int) -> Network:
    """Network described by ``config`` for data of the given shape."""
    common = dict(
        p=config.p,
        seed=config.seed,
        sdc_bounds=config.sdc_bounds,
        masked_layers=config.masked_layers,
        prior=config.prior,
        rho_init=config.rho_init,
    )
    if config.architecture == "mnist_cnn":
        if tuple(input_shape) != MNIST_INPUT_SHAPE or n_classes != MNIST_CLASSES:
            raise ConfigurationError(
                f"mnist_cnn needs inputs {MNIST_INPUT_SHAPE} and {MNIST_CLASSES} classes, "
                f"got {tuple(input_shape)} and {n_classes}"
            )
        return build_mnist_model(config.method, **common)
    return build_mlp(
        config.method, input_shape, n_classes, hidden_units=config.hidden_units, **common
    )

"""Dense tensors, reverse-mode autodiff and deterministic layers."""

from . import ops
from .gradcheck import GradCheckReport, ParameterCheck, finite_diff_check
from .layers import (
    BatchNorm,
    Conv2d,
    Dense,
    Flatten,
    ForwardContext,
    Layer,
    MaxPool2d,
    Network,
    ReLU,
)
from .ops import (
    batchnorm,
    conv2d,
    cross_entropy,
    dense,
    matmul,
    maxpool2d,
    relu,
    softmax_logits,
)
from .params import ParamStore
from .rng import SeedLineage, derive_seed, lineage_rng
from .tensor import Tape, Tensor, active_tape, as_tensor, backward, no_grad, record_op

__all__ = [
    "ops",
    "Tensor",
    "Tape",
    "active_tape",
    "as_tensor",
    "backward",
    "no_grad",
    "record_op",
    "ParamStore",
    "SeedLineage",
    "derive_seed",
    "lineage_rng",
    "ForwardContext",
    "Layer",
    "Dense",
    "Conv2d",
    "BatchNorm",
    "ReLU",
    "MaxPool2d",
    "Flatten",
    "Network",
    "matmul",
    "dense",
    "conv2d",
    "relu",
    "maxpool2d",
    "batchnorm",
    "softmax_logits",
    "cross_entropy",
    "finite_diff_check",
    "GradCheckReport",
    "ParameterCheck",
]

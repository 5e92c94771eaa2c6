"""
Masked forwards and the layers that apply them.

Every masked forward divides the masked pre-activation product by
``expected_mask_value(spec)`` so its expectation over masks equals the
unmasked product. Biases are added after the division and never masked.
"""

from typing import Optional

import numpy as np

from ..core import ops
from ..core.layers import Conv2d, Dense, ForwardContext, Layer
from ..core.params import ParamStore
from ..core.rng import derive_seed
from ..core.tensor import Tensor, as_tensor
from ..utils.errors import DegenerateMaskError, DimensionError
from ..utils.helpers import setup_logging
from .masks import MaskSpec, MaskTensor, expected_mask_value, sample_mask

logger = setup_logging(__name__)


def _normalizer(spec: MaskSpec) -> float:
    expectation = expected_mask_value(spec)
    if expectation <= 0.0:
        raise DegenerateMaskError(
            f"{spec.method} with p={spec.p} has expected mask value 0 and cannot be normalized"
        )
    return 1.0 / expectation


def _check_shape(mask: MaskTensor, target: Tensor, what: str) -> None:
    if mask.shape != target.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match {what} shape {target.shape}")


def masked_dense_forward(
    v_in,
    w,
    bias: Optional[Tensor],
    spec: MaskSpec,
    mask: MaskTensor,
) -> Tensor:
    """
    ((z ⊙ w) · v_in) / E[z] + bias.

    Args:
        v_in: Input [batch,in]
        w: Weight [out,in]
        bias: Bias [out] or None
        spec: Mask law the mask was drawn from
        mask: Mask shaped like ``w``

    Returns:
        Pre-activation [batch,out]
    """
    w = as_tensor(w)
    _check_shape(mask, w, "weight")
    factor = _normalizer(spec)
    out = ops.scale(ops.dense(v_in, ops.mul(w, mask.values)), factor)
    return ops.add(out, bias) if bias is not None else out


def masked_conv_forward(
    x,
    kernels,
    spec: MaskSpec,
    mask: MaskTensor,
    bias: Optional[Tensor] = None,
) -> Tensor:
    """Convolution with masked kernels, normalized like :func:`masked_dense_forward`."""
    kernels = as_tensor(kernels)
    _check_shape(mask, kernels, "kernel")
    factor = _normalizer(spec)
    out = ops.scale(ops.conv2d(x, ops.mul(kernels, mask.values)), factor)
    if bias is None:
        return out
    view = (-1, 1, 1) if out.ndim == 3 else (1, -1, 1, 1)
    return ops.add(out, ops.reshape(bias, view))


def dropout_forward(activations, spec: MaskSpec, mask: MaskTensor) -> Tensor:
    """Activations ⊙ mask / E[mask]."""
    activations = as_tensor(activations)
    _check_shape(mask, activations, "activation")
    return ops.scale(ops.mul(activations, mask.values), _normalizer(spec))


class _MaskedMixin:
    """Mask bookkeeping shared by the weight-masking layers."""

    spec: MaskSpec
    layer_index: int

    @property
    def stochastic(self) -> bool:  # type: ignore[override]
        return self.spec.p > 0.0

    def weight_mask(self, weight: Tensor, ctx: ForwardContext) -> MaskTensor:
        cached = ctx.noise_cache.get(self.layer_index)
        if cached is None:
            cached = sample_mask(self.spec, weight.shape, ctx.lineage(self.layer_index))
            ctx.noise_cache[self.layer_index] = cached
        return cached


class MaskedDense(_MaskedMixin, Dense):
    """Dense layer whose weights are masked on every stochastic pass."""

    def __init__(
        self,
        name: str,
        in_features: int,
        out_features: int,
        store: ParamStore,
        spec: MaskSpec,
        seed: int = 0,
    ):
        super().__init__(name, in_features, out_features, store, seed)
        self.spec = spec
        _normalizer(spec)

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if not (ctx.stochastic and self.stochastic):
            return ops.dense(x, self.weight, self.bias)
        mask = self.weight_mask(self.weight, ctx)
        return masked_dense_forward(x, self.weight, self.bias, self.spec, mask)


class MaskedConv2d(_MaskedMixin, Conv2d):
    """Convolution whose kernels are masked on every stochastic pass."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        store: ParamStore,
        spec: MaskSpec,
        seed: int = 0,
    ):
        super().__init__(name, in_channels, out_channels, store, seed)
        self.spec = spec
        _normalizer(spec)

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if not (ctx.stochastic and self.stochastic):
            return ops.conv2d(x, self.weight, self.bias)
        mask = self.weight_mask(self.weight, ctx)
        return masked_conv_forward(x, self.weight, self.spec, mask, self.bias)


class Dropout(Layer):
    """
    Activation masking. Row ``i`` of a batch draws its mask from the pass
    lineage extended by ``ctx.sample_offset + i``, so a sample sees the same
    mask whatever chunk it is evaluated in.
    """

    def __init__(self, name: str, spec: MaskSpec):
        super().__init__(name)
        self.spec = spec
        _normalizer(spec)

    @property
    def stochastic(self) -> bool:  # type: ignore[override]
        return self.spec.p > 0.0

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if not (ctx.stochastic and self.stochastic):
            return x
        lineage = ctx.lineage(self.layer_index)
        rows = [
            sample_mask(self.spec, x.shape[1:], derive_seed(*lineage.as_tuple(), ctx.sample_offset + i))
            .values.data
            for i in range(x.shape[0])
        ]
        values = np.stack(rows) if rows else np.empty(x.shape)
        mask = MaskTensor(values=Tensor(values), method=self.spec.method, seed_lineage=lineage)
        return dropout_forward(x, self.spec, mask)

"""
Differentiable primitives.

Every function takes :class:`Tensor` (or array-like) inputs, computes the
forward result with numpy and records an exact analytic backward rule on the
active tape. Image tensors use NCHW ordering.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..utils.errors import DimensionError
from .tensor import Tensor, as_tensor, record_op

ArrayLike = Union[Tensor, np.ndarray, float, Sequence[float]]

PROBABILITY_FLOOR = 1e-12
BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.1


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, extent in enumerate(shape) if extent == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------- elementwise


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as e:
        raise DimensionError(f"cannot add shapes {a.shape} and {b.shape}") from e

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return record_op("add", data, (a, b), backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError as e:
        raise DimensionError(f"cannot subtract shapes {a.shape} and {b.shape}") from e

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return record_op("sub", data, (a, b), backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as e:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}") from e

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return record_op("mul", data, (a, b), backward)


def scale(a: ArrayLike, factor: float) -> Tensor:
    """Multiply by a constant."""
    a = as_tensor(a)
    factor = float(factor)
    return record_op("scale", a.data * factor, (a,), lambda g: (g * factor,))


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    return record_op("relu", np.where(positive, x.data, 0.0), (x,), lambda g: (g * positive,))


def softplus(x: ArrayLike) -> Tensor:
    """log(1 + exp(x)), evaluated without overflow."""
    x = as_tensor(x)
    data = np.logaddexp(0.0, x.data)
    return record_op("softplus", data, (x,), lambda g: (g * expit(x.data),))


# ---------------------------------------------------------------- shape / reductions


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise DimensionError(f"cannot reshape {x.shape} into {tuple(shape)}") from e
    return record_op("reshape", data, (x,), lambda g: (g.reshape(x.shape),))


def flatten(x: ArrayLike) -> Tensor:
    """Collapse every axis after the first (batch) axis."""
    x = as_tensor(x)
    return reshape(x, (x.shape[0], -1))


def transpose(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {x.shape}")
    return record_op("transpose", x.data.T, (x,), lambda g: (g.T,))


def sum(x: ArrayLike, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    data = np.sum(x.data, axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return record_op("sum", data, (x,), backward)


def mean(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return scale(sum(x), 1.0 / x.size)


# ---------------------------------------------------------------- linear algebra


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product of [m,k] and [k,n]."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return record_op("matmul", a.data @ b.data, (a, b), backward)


def dense(v_in: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None) -> Tensor:
    """Fully-connected layer: v_in [batch,in] · weight[out,in]ᵀ + bias[out]."""
    v_in, weight = as_tensor(v_in), as_tensor(weight)
    if weight.ndim != 2 or v_in.ndim != 2 or v_in.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"dense shape mismatch: input {v_in.shape} against weight {weight.shape}"
        )
    out = matmul(v_in, transpose(weight))
    return add(out, bias) if bias is not None else out


# ---------------------------------------------------------------- convolution / pooling


def _as_batch(x: Tensor) -> Tuple[Tensor, bool]:
    if x.ndim == 3:
        return reshape(x, (1, *x.shape)), True
    if x.ndim != 4:
        raise DimensionError(f"expected [C,H,W] or [N,C,H,W] input, got shape {x.shape}")
    return x, False


def conv2d(
    x: ArrayLike,
    kernels: ArrayLike,
    bias: Optional[ArrayLike] = None,
    stride: int = 1,
    padding: Optional[int] = None,
) -> Tensor:
    """
    2-D cross-correlation with zero padding and stride 1.

    Args:
        x: Input [C_in,H,W] or [N,C_in,H,W]
        kernels: Filters [C_out,C_in,k,k] with odd k
        bias: Optional per-output-channel bias [C_out]
        stride: Must be 1
        padding: Zero padding; defaults to (k-1)/2 so spatial extents are kept

    Returns:
        Output [C_out,H,W] or [N,C_out,H,W]
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    if stride != 1:
        raise DimensionError(f"conv2d supports stride 1 only, got {stride}")
    if kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3] or kernels.shape[2] % 2 == 0:
        raise DimensionError(f"conv2d expects odd square kernels [O,C,k,k], got {kernels.shape}")
    k = kernels.shape[2]
    pad = (k - 1) // 2 if padding is None else padding
    if 2 * pad != k - 1:
        raise DimensionError(f"padding {pad} does not preserve spatial size for kernel {k}")

    batched, squeeze = _as_batch(x)
    n, c_in, h, w = batched.shape
    if c_in != kernels.shape[1]:
        raise DimensionError(
            f"conv2d channel mismatch: input {batched.shape} against kernels {kernels.shape}"
        )
    if h < 1 or w < 1:
        raise DimensionError(f"conv2d needs positive spatial extents, got {batched.shape}")

    xpad = np.pad(batched.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    kd = kernels.data
    c_out = kd.shape[0]
    # im2col: one row per output pixel, one column per (channel, ki, kj)
    windows = sliding_window_view(xpad, (k, k), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c_in * k * k)
    kmat = kd.reshape(c_out, -1)
    out = (cols @ kmat.T).reshape(n, h, w, c_out).transpose(0, 3, 1, 2)

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * h * w, c_out)
        dk = (gmat.T @ cols).reshape(kd.shape)
        dcols = (gmat @ kmat).reshape(n, h, w, c_in, k, k)
        dxpad = np.zeros_like(xpad)
        for i in range(k):
            for j in range(k):
                dxpad[:, :, i:i + h, j:j + w] += dcols[..., i, j].transpose(0, 3, 1, 2)
        return dxpad[:, :, pad:pad + h, pad:pad + w], dk

    result = record_op("conv2d", np.ascontiguousarray(out), (batched, kernels), backward)
    if bias is not None:
        bias = as_tensor(bias)
        result = add(result, reshape(bias, (1, -1, 1, 1)))
    if squeeze:
        result = reshape(result, result.shape[1:])
    return result


def maxpool2d(x: ArrayLike, k: int = 2, stride: int = 2) -> Tensor:
    """Non-overlapping k×k max pooling; spatial extents must be divisible by k."""
    x = as_tensor(x)
    if k != stride:
        raise DimensionError(f"maxpool2d supports stride == kernel, got k={k}, stride={stride}")
    batched, squeeze = _as_batch(x)
    n, c, h, w = batched.shape
    if h % k or w % k:
        raise DimensionError(f"maxpool2d needs spatial extents divisible by {k}, got {batched.shape}")

    windows = (
        batched.data.reshape(n, c, h // k, k, w // k, k)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // k, w // k, k * k)
    )
    winner = windows.argmax(axis=-1)
    data = np.take_along_axis(windows, winner[..., None], axis=-1)[..., 0]

    def backward(g):
        routed = np.zeros_like(windows)
        np.put_along_axis(routed, winner[..., None], g[..., None], axis=-1)
        grad = (
            routed.reshape(n, c, h // k, w // k, k, k)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        return (grad,)

    result = record_op("maxpool2d", data, (batched,), backward)
    if squeeze:
        result = reshape(result, result.shape[1:])
    return result


def batchnorm(
    x: ArrayLike,
    gamma: ArrayLike,
    beta: ArrayLike,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str = "train",
    momentum: float = BATCHNORM_MOMENTUM,
    eps: float = BATCHNORM_EPS,
) -> Tensor:
    """
    Per-channel batch normalization over [N,C,H,W] or [N,F].

    In ``train`` mode the batch statistics normalize the input and the running
    statistics are updated in place (running variance uses the unbiased batch
    variance). In ``eval`` mode the running statistics are used.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim not in (2, 4):
        raise DimensionError(f"batchnorm expects [N,F] or [N,C,H,W], got {x.shape}")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise DimensionError(
            f"batchnorm parameters {gamma.shape}/{beta.shape} do not match {channels} channels"
        )
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    view = (1, channels) if x.ndim == 2 else (1, channels, 1, 1)
    count = x.size // channels

    if mode == "train":
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        unbiased = var * count / max(count - 1, 1)
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    elif mode == "eval":
        mu = running_mean.copy()
        var = running_var.copy()
    else:
        raise ValueError(f"unknown batchnorm mode: {mode}")

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(view)) * inv_std.reshape(view)
    data = gamma.data.reshape(view) * xhat + beta.data.reshape(view)

    def backward(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(view)
        if mode == "train":
            dx = (
                inv_std.reshape(view)
                / count
                * (
                    count * dxhat
                    - dxhat.sum(axis=axes).reshape(view)
                    - xhat * (dxhat * xhat).sum(axis=axes).reshape(view)
                )
            )
        else:
            dx = dxhat * inv_std.reshape(view)
        return dx, dgamma, dbeta

    return record_op("batchnorm", data, (x, gamma, beta), backward)


# ---------------------------------------------------------------- probabilities


def softmax_logits(logits: ArrayLike) -> Tensor:
    """Softmax over the last axis with max-subtraction."""
    logits = as_tensor(logits)
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g):
        return (probs * (g - (g * probs).sum(axis=-1, keepdims=True)),)

    return record_op("softmax", probs, (logits,), backward)


def cross_entropy(
    probs: ArrayLike,
    labels: Union[np.ndarray, Sequence[int]],
    reduction: str = "mean",
) -> Tensor:
    """
    Negative log-likelihood of integer labels under row-wise probabilities.

    Probabilities at the true label are floored at 1e-12; a floored entry
    contributes no gradient.

    Args:
        probs: [batch,K] probabilities
        labels: Class indices in [0,K)
        reduction: "mean" or "sum" over the batch

    Returns:
        Scalar tensor
    """
    probs = as_tensor(probs)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise DimensionError(
            f"cross_entropy expects probs [batch,K] and labels [batch], got {probs.shape} and {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise DimensionError(f"labels must lie in [0,{probs.shape[1]})")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction: {reduction}")

    rows = np.arange(probs.shape[0])
    picked = probs.data[rows, labels]
    clamped = np.maximum(picked, PROBABILITY_FLOOR)
    divisor = probs.shape[0] if reduction == "mean" else 1
    loss = -np.log(clamped).sum() / divisor

    def backward(g):
        grad = np.zeros_like(probs.data)
        live = picked > PROBABILITY_FLOOR
        grad[rows[live], labels[live]] = -g / (divisor * picked[live])
        return (grad,)

    return record_op("cross_entropy", np.asarray(loss), (probs,), backward)

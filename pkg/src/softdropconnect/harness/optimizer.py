"""Adadelta optimizer."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from ..core.params import ParamStore
from ..core.tensor import Tensor
from ..utils.errors import DimensionError, NumericalError
from ..utils.helpers import setup_logging

logger = setup_logging(__name__)

DEFAULT_RHO = 0.9
DEFAULT_EPS = 1e-6


@dataclass
class AdadeltaState:
    """Running averages E[g²] and E[Δ²] per parameter path."""

    rho: float = DEFAULT_RHO
    eps: float = DEFAULT_EPS
    square_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    delta_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0


def adadelta_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdadeltaState,
    lr: float = 1.0,
    epoch: Optional[int] = None,
    batch: Optional[int] = None,
) -> None:
    """
    One Adadelta update, in place.

    E[g²] ← ρE[g²] + (1−ρ)g²; Δ = −√(E[Δ²]+ε)/√(E[g²]+ε)·g;
    E[Δ²] ← ρE[Δ²] + (1−ρ)Δ²; param += lr·Δ.

    A missing gradient counts as zero. Every gradient is checked before any
    parameter changes.
    """
    for path, tensor in params.items():
        grad = grads.get(path)
        if grad is None:
            continue
        if grad.shape != tensor.shape:
            raise DimensionError(f"gradient for {path} has shape {grad.shape}, parameter {tensor.shape}")
        if not np.isfinite(grad).all():
            logger.error(f"Non-finite gradient for {path}")
            raise NumericalError("non-finite gradient", epoch=epoch, batch=batch, parameter=path)

    rho, eps = state.rho, state.eps
    for path, tensor in params.items():
        grad = grads.get(path)
        if grad is None:
            grad = np.zeros_like(tensor.data)

        square_avg = state.square_avg.setdefault(path, np.zeros_like(tensor.data))
        delta_avg = state.delta_avg.setdefault(path, np.zeros_like(tensor.data))

        square_avg *= rho
        square_avg += (1.0 - rho) * grad * grad
        delta = -np.sqrt(delta_avg + eps) / np.sqrt(square_avg + eps) * grad
        delta_avg *= rho
        delta_avg += (1.0 - rho) * delta * delta
        tensor.data = tensor.data + lr * delta

    state.steps += 1


class Adadelta:
    """
    Adadelta over a :class:`ParamStore`, reading gradients from ``tensor.grad``.
    """

    def __init__(self, store: ParamStore, lr: float = 1.0, rho: float = DEFAULT_RHO, eps: float = DEFAULT_EPS):
        self.store = store
        self.lr = lr
        self.state = AdadeltaState(rho=rho, eps=eps)

    def step(self, epoch: Optional[int] = None, batch: Optional[int] = None) -> None:
        params = dict(self.store.items())
        grads = {path: tensor.grad for path, tensor in params.items()}
        adadelta_step(params, grads, self.state, self.lr, epoch=epoch, batch=batch)

    def zero_grad(self) -> None:
        self.store.zero_grad()

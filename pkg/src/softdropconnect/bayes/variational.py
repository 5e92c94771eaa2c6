"""
Gaussian variational weights and the scale-mixture prior.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp

from ..core import ops
from ..core.ops import unbroadcast
from ..core.tensor import Tensor, as_tensor, record_op
from ..utils.errors import DimensionError, NumericalError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ScaleMixturePrior(BaseModel):
    """p(w) = pi·N(w; 0, sigma1²) + (1−pi)·N(w; 0, sigma2²), per weight."""

    model_config = ConfigDict(frozen=True)

    pi: float = Field(default=0.5, gt=0.0, le=1.0)
    sigma1: float = Field(default=1.0, gt=0.0)
    sigma2: float = Field(default=math.exp(-6.0), gt=0.0)


@dataclass
class VariationalWeight:
    """Posterior N(mu, softplus(rho)²) over one weight tensor."""

    mu: Tensor
    rho: Tensor
    prior: ScaleMixturePrior

    def __post_init__(self):
        if self.mu.shape != self.rho.shape:
            raise DimensionError(f"mu {self.mu.shape} and rho {self.rho.shape} must share a shape")
        if not (np.isfinite(self.mu.data).all() and np.isfinite(self.rho.data).all()):
            raise NumericalError("variational parameters must be finite", parameter=self.mu.name)

    @property
    def shape(self):
        return self.mu.shape

    @property
    def sigma(self) -> np.ndarray:
        return np.logaddexp(0.0, self.rho.data)


def sample_weight(vw: VariationalWeight, epsilon: Union[Tensor, np.ndarray]) -> Tensor:
    """Reparameterized draw w = mu + softplus(rho)·epsilon."""
    epsilon = as_tensor(epsilon)
    if epsilon.shape != vw.shape:
        raise DimensionError(f"epsilon shape {epsilon.shape} does not match weight shape {vw.shape}")
    return ops.add(vw.mu, ops.mul(ops.softplus(vw.rho), epsilon))


def log_gaussian(w, mu, sigma) -> Tensor:
    """
    Σ log N(w; mu, sigma²) over all entries.

    ``mu`` and ``sigma`` broadcast against ``w``; gradients flow to all three.
    """
    w, mu, sigma = as_tensor(w), as_tensor(mu), as_tensor(sigma)
    if (sigma.data <= 0).any():
        raise NumericalError("log_gaussian needs sigma > 0")
    diff = w.data - mu.data
    var = sigma.data**2
    full = np.broadcast_shapes(w.shape, mu.shape, sigma.shape)
    terms = -LOG_SQRT_2PI - np.log(sigma.data) - diff**2 / (2.0 * var)
    value = np.broadcast_to(terms, full).sum()

    def backward(g):
        dw = np.broadcast_to(-diff / var, full) * g
        dsigma = np.broadcast_to(-1.0 / sigma.data + diff**2 / (var * sigma.data), full) * g
        return unbroadcast(dw, w.shape), unbroadcast(-dw, mu.shape), unbroadcast(dsigma, sigma.shape)

    return record_op("log_gaussian", np.asarray(value), (w, mu, sigma), backward)


def log_mixture_prior(w, prior: ScaleMixturePrior) -> Tensor:
    """Σ log p(w) under the scale mixture, evaluated with log-sum-exp."""
    w = as_tensor(w)
    log_n1 = -LOG_SQRT_2PI - math.log(prior.sigma1) - w.data**2 / (2.0 * prior.sigma1**2)
    log_n2 = -LOG_SQRT_2PI - math.log(prior.sigma2) - w.data**2 / (2.0 * prior.sigma2**2)
    stacked = np.stack([log_n1, log_n2])
    mix = np.array([prior.pi, 1.0 - prior.pi]).reshape((2,) + (1,) * w.ndim)
    log_density = logsumexp(stacked, axis=0, b=mix)

    def backward(g):
        with np.errstate(divide="ignore"):
            log_mix = np.log(mix)
        resp = np.exp(stacked + log_mix - log_density)
        slope = -w.data * (resp[0] / prior.sigma1**2 + resp[1] / prior.sigma2**2)
        return (slope * g,)

    return record_op("log_mixture_prior", np.asarray(log_density.sum()), (w,), backward)


def gaussian_kl(mu_q: float, sigma_q: float, mu_p: float, sigma_p: float) -> float:
    """KL(N(mu_q, sigma_q²) ‖ N(mu_p, sigma_p²)) in nats."""
    return (
        math.log(sigma_p / sigma_q)
        + (sigma_q**2 + (mu_q - mu_p) ** 2) / (2.0 * sigma_p**2)
        - 0.5
    )

"""Bayes-by-Backprop: variational weights, scale-mixture prior and the ELBO."""

from .elbo import ElboBreakdown, elbo_minibatch, kl_weights
from .layers import BayesDense, bbb_dense_forward
from .variational import (
    ScaleMixturePrior,
    VariationalWeight,
    gaussian_kl,
    log_gaussian,
    log_mixture_prior,
    sample_weight,
)

__all__ = [
    "ScaleMixturePrior",
    "VariationalWeight",
    "sample_weight",
    "log_gaussian",
    "log_mixture_prior",
    "gaussian_kl",
    "BayesDense",
    "bbb_dense_forward",
    "ElboBreakdown",
    "elbo_minibatch",
    "kl_weights",
]

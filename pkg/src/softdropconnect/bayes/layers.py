"""Bayes-by-Backprop dense layer."""

from typing import Optional, Tuple

import numpy as np

from ..core import ops
from ..core.layers import ForwardContext, Layer, fan_in_uniform, init_rng
from ..core.params import ParamStore
from ..core.tensor import Tensor
from ..utils.helpers import setup_logging
from .variational import (
    ScaleMixturePrior,
    VariationalWeight,
    log_gaussian,
    log_mixture_prior,
    sample_weight,
)

logger = setup_logging(__name__)

DEFAULT_RHO_INIT = -5.0


def _log_terms(vw: VariationalWeight, w: Tensor) -> Tuple[Tensor, Tensor]:
    return log_gaussian(w, vw.mu, ops.softplus(vw.rho)), log_mixture_prior(w, vw.prior)


def bbb_dense_forward(
    v_in,
    vw_weights: VariationalWeight,
    vw_bias: VariationalWeight,
    rng: np.random.Generator,
    ctx: Optional[ForwardContext] = None,
) -> Tensor:
    """
    Dense forward with weights freshly drawn from the posterior.

    A standard-normal epsilon is drawn from ``rng`` for the weights, then for
    the bias. When ``ctx.collect_kl`` is set, log q and log p of the drawn
    values are appended to the context.
    """
    w = sample_weight(vw_weights, rng.standard_normal(vw_weights.shape))
    b = sample_weight(vw_bias, rng.standard_normal(vw_bias.shape))
    if ctx is not None and ctx.collect_kl:
        for vw, draw in ((vw_weights, w), (vw_bias, b)):
            log_q, log_p = _log_terms(vw, draw)
            ctx.log_q.append(log_q)
            ctx.log_prior.append(log_p)
    return ops.dense(v_in, w, b)


class BayesDense(Layer):
    """
    Dense layer with a Gaussian posterior per weight.

    Parameters are ``<name>.weight_mu``, ``<name>.weight_rho``,
    ``<name>.bias_mu`` and ``<name>.bias_rho``. In ``eval`` mode the
    posterior means are used.
    """

    stochastic = True

    def __init__(
        self,
        name: str,
        in_features: int,
        out_features: int,
        store: ParamStore,
        prior: Optional[ScaleMixturePrior] = None,
        rho_init: float = DEFAULT_RHO_INIT,
        seed: int = 0,
    ):
        super().__init__(name)
        self.in_features = in_features
        self.out_features = out_features
        self.prior = prior or ScaleMixturePrior()
        rng = init_rng(seed, name)
        self.weight = VariationalWeight(
            mu=store.add(
                f"{name}.weight_mu", fan_in_uniform(rng, (out_features, in_features), in_features)
            ),
            rho=store.add(f"{name}.weight_rho", np.full((out_features, in_features), rho_init)),
            prior=self.prior,
        )
        self.bias = VariationalWeight(
            mu=store.add(f"{name}.bias_mu", fan_in_uniform(rng, (out_features,), in_features)),
            rho=store.add(f"{name}.bias_rho", np.full((out_features,), rho_init)),
            prior=self.prior,
        )

    def forward(self, x: Tensor, ctx: ForwardContext) -> Tensor:
        if not ctx.stochastic:
            return ops.dense(x, self.weight.mu, self.bias.mu)
        if ctx.collect_kl:
            return bbb_dense_forward(x, self.weight, self.bias, ctx.rng(self.layer_index), ctx)

        # Inference passes reuse one draw per pass across input chunks.
        draws = ctx.noise_cache.get(self.layer_index)
        if draws is None:
            rng = ctx.rng(self.layer_index)
            draws = (
                sample_weight(self.weight, rng.standard_normal(self.weight.shape)),
                sample_weight(self.bias, rng.standard_normal(self.bias.shape)),
            )
            ctx.noise_cache[self.layer_index] = draws
        w, b = draws
        return ops.dense(x, w, b)

"""
Monte-Carlo minibatch ELBO.

For a minibatch of size B and S weight draws w_s::

    total = kl_weight · mean_s[log q(w_s) − log p(w_s)] + mean_s[−Σ_B log p(y|x, w_s)]

The deterministic prefix of the network (layers before the first stochastic
one) runs once per minibatch; the stochastic suffix runs once per draw.
"""

from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from ..core import ops
from ..core.layers import ForwardContext, Network
from ..core.tensor import Tensor
from ..utils.errors import ConfigurationError
from ..utils.helpers import setup_logging

logger = setup_logging(__name__)

KlSchedule = Literal["uniform", "geometric"]


class ElboBreakdown(BaseModel):
    """Terms of one minibatch objective, averaged over weight draws."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    log_q: float
    log_prior: float
    nll: float = Field(description="Minibatch-summed negative log-likelihood")
    kl_weight: float = Field(ge=0.0)
    total: float
    kl_samples: int = Field(ge=1)

    _objective: Optional[Tensor] = PrivateAttr(default=None)
    _probs: Optional[np.ndarray] = PrivateAttr(default=None)

    @property
    def objective(self) -> Tensor:
        """Differentiable total, recorded on the tape active during the call."""
        return self._objective

    @property
    def probs(self) -> np.ndarray:
        """Softmax outputs averaged over the draws, [batch,K]."""
        return self._probs

    @property
    def kl(self) -> float:
        return self.log_q - self.log_prior


def kl_weights(num_batches: int, schedule: KlSchedule = "uniform") -> List[float]:
    """
    Per-minibatch weights of the complexity term.

    ``uniform`` gives 1/M for each of M minibatches; ``geometric`` gives
    2^(M−i)/(2^M − 1) for i = 1..M. Both sum to 1.
    """
    if num_batches < 1:
        raise ConfigurationError(f"number of minibatches must be positive, got {num_batches}")
    if schedule == "uniform":
        return [1.0 / num_batches] * num_batches
    if schedule == "geometric":
        # Computed in log space; 2^M overflows floats for long epochs.
        exponents = np.arange(num_batches - 1, -1, -1, dtype=np.float64)
        log_weights = exponents * np.log(2.0) - np.logaddexp.reduce(exponents * np.log(2.0))
        return np.exp(log_weights).tolist()
    raise ConfigurationError(f"unknown kl schedule: {schedule}")


def elbo_minibatch(
    model: Network,
    batch: Sequence[np.ndarray],
    n_train_samples: int,
    kl_weight: float,
    master_seed: int = 0,
    pass_offset: int = 0,
) -> ElboBreakdown:
    """
    Evaluate the Monte-Carlo minibatch objective.

    Call under an active :class:`Tape` to back-propagate through
    ``breakdown.objective``.

    Args:
        model: Network with at least one variational layer
        batch: (inputs, labels)
        n_train_samples: Number of weight draws S
        kl_weight: Weight of the complexity term
        master_seed: Lineage seed of the draws
        pass_offset: Pass index of the first draw; draw s uses pass_offset + s

    Returns:
        ElboBreakdown with the differentiable objective attached
    """
    inputs, labels = batch
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ConfigurationError("cannot evaluate the objective on an empty minibatch")
    if n_train_samples < 1:
        raise ConfigurationError(f"n_train_samples must be >= 1, got {n_train_samples}")

    start = model.stochastic_start
    prefix_ctx = ForwardContext(mode="train", master_seed=master_seed, pass_index=pass_offset)
    features = model.forward(inputs, prefix_ctx, stop=start)

    objective: Optional[Tensor] = None
    log_q_total, log_p_total, nll_total = 0.0, 0.0, 0.0
    probs_total = None
    for s in range(n_train_samples):
        ctx = ForwardContext(
            mode="train", master_seed=master_seed, pass_index=pass_offset + s, collect_kl=True
        )
        probs = ops.softmax_logits(model.forward(features, ctx, start=start))
        nll = ops.cross_entropy(probs, labels, reduction="sum")
        term = nll
        if ctx.log_q:
            log_q = _total(ctx.log_q)
            log_p = _total(ctx.log_prior)
            log_q_total += log_q.item()
            log_p_total += log_p.item()
            term = ops.add(ops.scale(ops.sub(log_q, log_p), kl_weight), nll)
        nll_total += nll.item()
        probs_total = probs.data if probs_total is None else probs_total + probs.data
        objective = term if objective is None else ops.add(objective, term)

    n = float(n_train_samples)
    breakdown = ElboBreakdown(
        log_q=log_q_total / n,
        log_prior=log_p_total / n,
        nll=nll_total / n,
        kl_weight=kl_weight,
        total=kl_weight * (log_q_total - log_p_total) / n + nll_total / n,
        kl_samples=n_train_samples,
    )
    breakdown._objective = ops.scale(objective, 1.0 / n)
    breakdown._probs = probs_total / n
    return breakdown


def _total(terms: List[Tensor]) -> Tensor:
    out = terms[0]
    for term in terms[1:]:
        out = ops.add(out, term)
    return out

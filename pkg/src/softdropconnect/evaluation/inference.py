"""
Monte-Carlo inference.

Pass ``t`` of a run with master seed ``s`` draws every mask and weight from
the lineage ``(s, t, layer_index)``, so the same pass sees the same draws for
every input chunk and results are independent of how passes are scheduled on
threads.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from ..core import ops
from ..core.layers import ForwardContext, Network
from ..core.tensor import no_grad
from ..utils.errors import ConfigurationError
from ..utils.helpers import setup_logging
from .metrics import PredictiveSummary

logger = setup_logging(__name__)


def predict_passes(
    model: Network,
    inputs: np.ndarray,
    T: int,
    master_seed: int,
    batch_size: int = 100,
    workers: int = 1,
) -> np.ndarray:
    """
    Softmax outputs of T stochastic passes.

    The deterministic prefix of the network runs once per input chunk; only
    the stochastic suffix is repeated.

    Args:
        model: Network to evaluate (running statistics are used for batchnorm)
        inputs: Batched inputs
        T: Number of passes
        master_seed: Lineage seed of the run
        batch_size: Inputs per forward chunk
        workers: Threads running passes concurrently

    Returns:
        Array [N,T,K]
    """
    if T < 1:
        raise ConfigurationError(f"number of Monte-Carlo passes must be >= 1, got {T}")
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    inputs = np.asarray(inputs, dtype=np.float64)
    n = inputs.shape[0]
    start = model.stochastic_start

    with no_grad():
        prefix_ctx = ForwardContext(mode="mc", master_seed=master_seed)
        chunks = [
            (i, model.forward(inputs[i:i + batch_size], prefix_ctx, stop=start).data)
            for i in range(0, n, batch_size)
        ]

    results: Optional[np.ndarray] = None

    def run_pass(t: int) -> List[np.ndarray]:
        ctx = ForwardContext(mode="mc", master_seed=master_seed, pass_index=t)
        outputs = []
        with no_grad():
            for offset, features in chunks:
                ctx.sample_offset = offset
                outputs.append(ops.softmax_logits(model.forward(features, ctx, start=start)).data)
        return outputs

    def store(t: int, outputs: List[np.ndarray]) -> None:
        nonlocal results
        for (offset, _), probs in zip(chunks, outputs):
            if results is None:
                results = np.empty((n, T, probs.shape[-1]))
            results[offset:offset + probs.shape[0], t] = probs

    if workers > 1 and T > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for t, outputs in enumerate(pool.map(run_pass, range(T))):
                store(t, outputs)
    else:
        for t in range(T):
            store(t, run_pass(t))

    logger.debug(f"Ran {T} passes over {n} inputs ({len(chunks)} chunks, prefix of {start} layers)")
    return results if results is not None else np.empty((0, T, 0))


def mc_predict_batch(
    model: Network,
    inputs: np.ndarray,
    T: int,
    master_seed: int,
    batch_size: int = 100,
    workers: int = 1,
) -> List[PredictiveSummary]:
    """One PredictiveSummary per input, sharing the T pass lineages."""
    passes = predict_passes(model, inputs, T, master_seed, batch_size, workers)
    deterministic = T > 1 and not model.is_stochastic
    if deterministic:
        logger.warning(f"Model has no stochastic layers; all {T} passes are identical")
    return [PredictiveSummary.from_passes(row, deterministic_warning=deterministic) for row in passes]


def mc_predict(model: Network, x: np.ndarray, T: int, master_seed: int) -> PredictiveSummary:
    """
    Summarize T stochastic passes over a single (unbatched) input.

    Args:
        model: Network to evaluate
        x: One input, e.g. [C,H,W] or [features]
        T: Number of passes
        master_seed: Lineage seed

    Returns:
        PredictiveSummary
    """
    batch = np.asarray(x, dtype=np.float64)[np.newaxis]
    return mc_predict_batch(model, batch, T, master_seed, batch_size=1)[0]

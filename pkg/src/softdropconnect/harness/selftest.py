"""
Closed-form oracle checks and the finite-difference gradient suite.
"""

import math
from typing import Callable, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel

from ..bayes.layers import bbb_dense_forward
from ..bayes.variational import ScaleMixturePrior, VariationalWeight, gaussian_kl
from ..core import ops
from ..core.gradcheck import GradCheckReport, finite_diff_check
from ..core.layers import ForwardContext
from ..core.rng import derive_seed
from ..core.tensor import Tensor, no_grad
from ..data.idx import parse_idx
from ..evaluation.metrics import mutual_information
from ..masking.layers import dropout_forward, masked_conv_forward, masked_dense_forward
from ..masking.masks import expected_mask_value, make_spec, sample_mask
from ..utils.errors import IdxLengthError
from ..utils.helpers import setup_logging
from .optimizer import AdadeltaState, adadelta_step

logger = setup_logging(__name__)

MASK_SAMPLES = 100_000


class OracleResult(BaseModel):
    """One selftest check."""

    name: str
    expected: str
    actual: str
    passed: bool


def _close(name: str, expected: float, actual: float, tol: float) -> OracleResult:
    return OracleResult(
        name=name,
        expected=f"{expected:.6g}",
        actual=f"{actual:.6g}",
        passed=bool(abs(expected - actual) <= tol),
    )


def _mi_worked_example() -> OracleResult:
    return _close("mutual information (0.8,0.2)/(0.6,0.4)", 0.0349, mutual_information([[0.8, 0.2], [0.6, 0.4]]), 5e-5)


def _adadelta_first_step() -> OracleResult:
    w = Tensor([1.0])
    adadelta_step({"w": w}, {"w": np.array([1.0])}, AdadeltaState(rho=0.9, eps=1e-6))
    expected = -math.sqrt(1e-6) / math.sqrt(0.1 + 1e-6)
    return _close("adadelta first step", expected, float(w.data[0]) - 1.0, 1e-12)


def _mask_expectations() -> List[OracleResult]:
    results = []
    for method, p in (("dropconnect", 0.25), ("sdc", 0.5), ("sdc_strong", 0.5), ("sdc_weak", 0.5)):
        spec = make_spec(method, p)
        empirical = float(sample_mask(spec, (MASK_SAMPLES,), derive_seed(0, 11)).values.data.mean())
        expected = expected_mask_value(spec)
        results.append(_close(f"E[mask] {method} p={p:g}", expected, empirical, 0.01 * expected))
    return results


def _idx_fixtures() -> List[OracleResult]:
    cube = parse_idx(bytes([0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2]) + bytes(range(8)))
    labels = parse_idx(bytes([0, 0, 8, 1, 0, 0, 0, 3, 7, 2, 9]))
    try:
        parse_idx(bytes([0, 0, 8, 1, 0, 0, 0, 3, 7, 2]))
        short = "parsed"
    except IdxLengthError as e:
        short = f"IdxLengthError {e.expected}/{e.actual}"
    return [
        OracleResult(
            name="idx rank-3 fixture",
            expected="dims (2, 2, 2), payload 0..7",
            actual=f"dims {cube.dims}, payload {cube.payload.tolist()}",
            passed=cube.dims == (2, 2, 2) and cube.payload.tolist() == list(range(8)),
        ),
        OracleResult(
            name="idx label fixture",
            expected="[7, 2, 9]",
            actual=str(labels.payload.tolist()),
            passed=labels.payload.tolist() == [7, 2, 9],
        ),
        OracleResult(
            name="idx truncated payload",
            expected="IdxLengthError 3/2",
            actual=short,
            passed=short == "IdxLengthError 3/2",
        ),
    ]


def _softmax_oracle() -> OracleResult:
    with no_grad():
        probs = ops.softmax_logits(Tensor([math.log(1.0), math.log(3.0)])).data
    return _close("softmax [ln 1, ln 3] -> 0.75", 0.75, float(probs[1]), 1e-12)


def _kl_identity() -> OracleResult:
    return _close("closed-form KL of identical Gaussians", 0.0, gaussian_kl(0.3, 0.7, 0.3, 0.7), 1e-15)


def run_selftest() -> List[OracleResult]:
    """Run every closed-form oracle; returns one result per check."""
    results = [_mi_worked_example(), _adadelta_first_step(), _softmax_oracle(), _kl_identity()]
    results += _mask_expectations()
    results += _idx_fixtures()
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning(f"Selftest failures: {failed}")
    return results


def _projection(shape, rng: np.random.Generator) -> Callable[[Tensor], Tensor]:
    weights = Tensor(rng.standard_normal(shape))
    return lambda out: ops.sum(ops.mul(out, weights))


def _param(rng: np.random.Generator, shape, name: str, scale: float = 0.5) -> Tensor:
    return Tensor(scale * rng.standard_normal(shape), requires_grad=True, name=name)


def gradient_suite(seed: int = 0, max_coords: int = 40) -> Dict[str, GradCheckReport]:
    """
    Central finite-difference checks of every layer kind.

    Masks and Bayes-by-Backprop epsilons are frozen per case so the checked
    function is deterministic.

    Args:
        seed: Seed of the inputs, parameters and frozen noise
        max_coords: Coordinates checked per parameter tensor

    Returns:
        Report per case name
    """
    rng = derive_seed(seed, 99)
    cases: Dict[str, Tuple[Callable[[], Tensor], List[Tensor]]] = {}

    x = Tensor(rng.standard_normal((4, 5)))
    w, b = _param(rng, (3, 5), "weight"), _param(rng, (3,), "bias")
    project = _projection((4, 3), rng)
    cases["dense"] = (lambda: project(ops.dense(x, w, b)), [w, b])

    labels = np.array([0, 2, 1, 2])
    cases["softmax_cross_entropy"] = (
        lambda: ops.cross_entropy(ops.softmax_logits(ops.dense(x, w, b)), labels), [w, b]
    )

    images = Tensor(rng.standard_normal((2, 2, 6, 6)))
    kernels, conv_bias = _param(rng, (3, 2, 3, 3), "kernels"), _param(rng, (3,), "bias")
    project_conv = _projection((2, 3, 6, 6), rng)
    cases["conv2d"] = (lambda: project_conv(ops.conv2d(images, kernels, conv_bias)), [kernels, conv_bias])

    project_pool = _projection((2, 3, 3, 3), rng)
    cases["conv_relu_maxpool"] = (
        lambda: project_pool(ops.maxpool2d(ops.relu(ops.conv2d(images, kernels, conv_bias)))),
        [kernels, conv_bias],
    )

    features = Tensor(rng.standard_normal((4, 3, 2, 2)))
    gamma = Tensor(1.0 + 0.1 * rng.standard_normal(3), requires_grad=True, name="gamma")
    beta = _param(rng, (3,), "beta", 0.1)
    running_mean, running_var = np.zeros(3), np.ones(3)
    project_bn = _projection((4, 3, 2, 2), rng)
    cases["batchnorm"] = (
        lambda: project_bn(ops.batchnorm(features, gamma, beta, running_mean, running_var, mode="train")),
        [gamma, beta],
    )

    spec = make_spec("sdc_weak", 0.5)
    weight_mask = sample_mask(spec, w.shape, derive_seed(seed, 1))
    cases["masked_dense"] = (lambda: project(masked_dense_forward(x, w, b, spec, weight_mask)), [w, b])

    kernel_mask = sample_mask(make_spec("dropconnect", 0.25), kernels.shape, derive_seed(seed, 2))
    cases["masked_conv2d"] = (
        lambda: project_conv(
            masked_conv_forward(images, kernels, make_spec("dropconnect", 0.25), kernel_mask, conv_bias)
        ),
        [kernels, conv_bias],
    )

    activation_mask = sample_mask(make_spec("dropout", 0.5), (4, 3), derive_seed(seed, 3))
    cases["dropout"] = (
        lambda: project(dropout_forward(ops.relu(ops.dense(x, w, b)), make_spec("dropout", 0.5), activation_mask)),
        [w, b],
    )

    prior = ScaleMixturePrior()
    mu_w, rho_w = _param(rng, (3, 5), "weight_mu", 0.3), Tensor(-3.0 + 0.1 * rng.standard_normal((3, 5)), requires_grad=True, name="weight_rho")
    mu_b, rho_b = _param(rng, (3,), "bias_mu", 0.3), Tensor(np.full(3, -3.0), requires_grad=True, name="bias_rho")

    def bbb_objective() -> Tensor:
        ctx = ForwardContext(mode="train", collect_kl=True)
        out = bbb_dense_forward(
            x,
            VariationalWeight(mu_w, rho_w, prior),
            VariationalWeight(mu_b, rho_b, prior),
            derive_seed(seed, 4),
            ctx,
        )
        total = project(out)
        for log_q, log_p in zip(ctx.log_q, ctx.log_prior):
            total = ops.add(total, ops.sub(log_q, log_p))
        return total

    cases["bbb_dense"] = (bbb_objective, [mu_w, rho_w, mu_b, rho_b])

    reports = {}
    for name, (objective, params) in cases.items():
        reports[name] = finite_diff_check(objective, params, max_coords=max_coords, seed=seed)
        logger.info(f"gradcheck {name}: max relative error {reports[name].max_relative_error:.2e}")
    return reports

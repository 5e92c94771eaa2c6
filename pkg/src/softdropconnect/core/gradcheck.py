"""
Finite-difference verification of tape gradients.
"""

from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from ..utils.helpers import setup_logging
from .tensor import Tape, Tensor

logger = setup_logging(__name__)

DEFAULT_STEP = 1e-6
DEFAULT_TOLERANCE = 1e-4
RELATIVE_FLOOR = 1e-3


class ParameterCheck(BaseModel):
    """Result for one parameter tensor."""

    name: str
    checked: int = Field(ge=0)
    skipped_kinks: int = Field(default=0, ge=0)
    max_relative_error: float = Field(ge=0.0)
    max_abs_error: float = Field(ge=0.0)


class GradCheckReport(BaseModel):
    """Outcome of a finite-difference check over several parameters."""

    step: float
    tolerance: float
    parameters: List[ParameterCheck] = Field(default_factory=list)

    @property
    def max_relative_error(self) -> float:
        return max((p.max_relative_error for p in self.parameters), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOLERANCE,
    max_coords: Optional[int] = None,
    seed: int = 0,
    names: Optional[Sequence[str]] = None,
) -> GradCheckReport:
    """
    Compare tape gradients of a scalar function against central differences.

    ``f`` must rebuild the computation from the current parameter values on
    every call (any randomness inside it must be frozen). Coordinates where
    the two one-sided slopes disagree (a relu/maxpool kink within ``step``)
    are skipped.

    Args:
        f: Zero-argument function returning a scalar tensor
        params: Tensors with ``requires_grad`` to check
        step: Central-difference step
        tol: Pass threshold on the max relative error
        max_coords: Check at most this many randomly chosen coordinates per parameter
        seed: Seed for coordinate sampling
        names: Report names (defaults to tensor names)

    Returns:
        GradCheckReport with one entry per parameter
    """
    for tensor in params:
        tensor.zero_grad()
    with Tape() as tape:
        loss = f()
    tape.backward(loss)

    analytic: Dict[int, np.ndarray] = {
        id(t): (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for t in params
    }
    rng = np.random.default_rng(seed)
    report = GradCheckReport(step=step, tolerance=tol)

    def evaluate() -> float:
        return float(f().item())

    base = evaluate()
    for position, tensor in enumerate(params):
        name = (names[position] if names else None) or tensor.name or f"param{position}"
        tensor.data = np.ascontiguousarray(tensor.data)
        flat = tensor.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))

        grad = analytic[id(tensor)].reshape(-1)
        worst_rel, worst_abs, checked, kinks = 0.0, 0.0, 0, 0
        for i in coords:
            original = flat[i]
            flat[i] = original + step
            plus = evaluate()
            flat[i] = original - step
            minus = evaluate()
            flat[i] = original

            forward_slope = (plus - base) / step
            backward_slope = (base - minus) / step
            numeric = (plus - minus) / (2 * step)
            if abs(forward_slope - backward_slope) > RELATIVE_FLOOR * max(1.0, abs(numeric)):
                kinks += 1
                continue

            checked += 1
            worst_abs = max(worst_abs, abs(grad[i] - numeric))
            worst_rel = max(worst_rel, relative_error(grad[i], numeric))

        report.parameters.append(
            ParameterCheck(
                name=name,
                checked=checked,
                skipped_kinks=kinks,
                max_relative_error=worst_rel,
                max_abs_error=worst_abs,
            )
        )
        logger.debug(f"gradcheck {name}: {checked} coords, max rel err {worst_rel:.2e}, {kinks} kinks")

    return report

"""
Mask laws of the Dropout / DropConnect / SoftDropConnect family.

Each mask entry is perturbed independently with probability ``p`` (the
leave-out rate). Bernoulli methods set a perturbed entry to 0; the
SoftDropConnect methods replace it with a draw from ``U(a, b)``. Unperturbed
entries are 1.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import ks_2samp

from ..core.rng import SeedLineage, derive_seed, lineage_rng
from ..core.tensor import Tensor
from ..utils.errors import ConfigurationError
from ..utils.helpers import setup_logging

logger = setup_logging(__name__)

MaskMethod = Literal["dropout", "dropconnect", "sdc", "sdc_strong", "sdc_weak"]

BERNOULLI_METHODS = ("dropout", "dropconnect")
SDC_METHODS = ("sdc", "sdc_strong", "sdc_weak")
MASK_METHODS = BERNOULLI_METHODS + SDC_METHODS

FIXED_BOUNDS = {
    "sdc_strong": (0.0, 0.5),
    "sdc_weak": (0.5, 1.0),
}
DEFAULT_SDC_BOUNDS = (0.0, 1.0)


class MaskSpec(BaseModel):
    """Sampling law of one masked layer."""

    model_config = ConfigDict(frozen=True)

    method: MaskMethod
    p: float = Field(ge=0.0, le=1.0, description="Leave-out rate")
    bounds: Optional[Tuple[float, float]] = Field(
        default=None, description="Uniform bounds (a, b) for the sdc family"
    )

    @model_validator(mode="before")
    @classmethod
    def fill_bounds(cls, data):
        if isinstance(data, dict):
            method = data.get("method")
            if method in FIXED_BOUNDS and data.get("bounds") is None:
                data = {**data, "bounds": FIXED_BOUNDS[method]}
            elif method == "sdc" and data.get("bounds") is None:
                data = {**data, "bounds": DEFAULT_SDC_BOUNDS}
        return data

    @model_validator(mode="after")
    def check_bounds(self) -> "MaskSpec":
        if self.method in BERNOULLI_METHODS:
            if self.bounds is not None:
                raise ValueError(f"{self.method} does not take uniform bounds")
            return self
        a, b = self.bounds
        if not 0.0 <= a < b <= 1.0:
            raise ValueError(f"uniform bounds must satisfy 0 <= a < b <= 1, got ({a}, {b})")
        fixed = FIXED_BOUNDS.get(self.method)
        if fixed is not None and (a, b) != fixed:
            raise ValueError(f"{self.method} uses fixed bounds {fixed}, got ({a}, {b})")
        return self

    @property
    def is_bernoulli(self) -> bool:
        return self.method in BERNOULLI_METHODS


def make_spec(method: str, p: float, bounds: Optional[Sequence[float]] = None) -> MaskSpec:
    """Build a MaskSpec, reporting invalid combinations as configuration errors."""
    try:
        return MaskSpec(method=method, p=p, bounds=tuple(bounds) if bounds is not None else None)
    except ValueError as e:
        raise ConfigurationError(f"invalid mask spec ({method}, p={p}, bounds={bounds}): {e}") from e


@dataclass
class MaskTensor:
    """One sampled mask and the lineage it was drawn from."""

    values: Tensor
    method: str
    seed_lineage: Optional[SeedLineage] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape


def expected_mask_value(spec: MaskSpec) -> float:
    """E[z]: 1−p for Bernoulli laws, (1−p) + p·(a+b)/2 for the sdc family."""
    if spec.is_bernoulli:
        return 1.0 - spec.p
    a, b = spec.bounds
    return (1.0 - spec.p) + spec.p * (a + b) / 2.0


def mask_variance(spec: MaskSpec, normalized: bool = False) -> float:
    """
    Per-entry variance of the mask law.

    Args:
        spec: Mask law
        normalized: Variance of z / E[z] instead of z

    Returns:
        Variance (``inf`` for a normalized degenerate law)
    """
    p = spec.p
    if spec.is_bernoulli:
        mean, second = 1.0 - p, 1.0 - p
    else:
        a, b = spec.bounds
        mu = (a + b) / 2.0
        mean = (1.0 - p) + p * mu
        second = (1.0 - p) + p * (mu * mu + (b - a) ** 2 / 12.0)
    variance = max(second - mean * mean, 0.0)
    if not normalized:
        return variance
    return variance / (mean * mean) if mean > 0 else float("inf")


def mask_rng(seed_lineage: SeedLineage) -> np.random.Generator:
    """Generator of the masks drawn for one (master seed, pass, layer) lineage."""
    return lineage_rng(seed_lineage)


def sample_mask(
    spec: MaskSpec,
    shape: Sequence[int],
    rng: Union[np.random.Generator, SeedLineage],
) -> MaskTensor:
    """
    Draw one mask.

    Args:
        spec: Mask law
        shape: Mask shape (weight shape or activation shape)
        rng: Generator, or a seed lineage to derive it from

    Returns:
        MaskTensor with entries in {0, 1} (Bernoulli) or {1} ∪ [a, b] (sdc)
    """
    lineage = rng if isinstance(rng, SeedLineage) else None
    generator = mask_rng(rng) if lineage is not None else rng
    shape = tuple(int(s) for s in shape)

    perturbed = generator.random(shape) < spec.p
    if spec.is_bernoulli:
        values = np.where(perturbed, 0.0, 1.0)
    else:
        a, b = spec.bounds
        values = np.where(perturbed, generator.uniform(a, b, size=shape), 1.0)
    return MaskTensor(values=Tensor(values), method=spec.method, seed_lineage=lineage)


def mask_entries_valid(spec: MaskSpec, values: np.ndarray) -> bool:
    """Whether every entry lies in the set the law allows."""
    values = np.asarray(values)
    if spec.is_bernoulli:
        return bool(np.isin(values, (0.0, 1.0)).all())
    a, b = spec.bounds
    return bool(((values == 1.0) | ((values >= a) & (values <= b))).all())


class EquivalenceReport(BaseModel):
    """Comparison of an ε-collapsed sdc law with DropConnect at equal p."""

    p: float
    epsilon: float
    n_samples: int
    fraction_ones_sdc: float
    fraction_ones_dropconnect: float
    max_gated_value: float = Field(description="Largest perturbed sdc entry")
    ks_statistic: float
    ks_pvalue: float


def degenerate_equivalence_check(
    n_samples: int,
    p: float = 0.5,
    epsilon: float = 1e-9,
    seed: int = 0,
) -> EquivalenceReport:
    """
    Sample sdc masks with bounds (0, ε) and DropConnect masks at the same p and
    report their empirical CDF distance, treating sdc entries below ε as the
    gated (zero) draw.
    """
    sdc = sample_mask(make_spec("sdc", p, (0.0, epsilon)), (n_samples,), derive_seed(seed, 0))
    drop = sample_mask(make_spec("dropconnect", p), (n_samples,), derive_seed(seed, 1))

    sdc_values = sdc.values.data
    collapsed = np.where(sdc_values < epsilon, 0.0, sdc_values)
    gated = sdc_values[sdc_values != 1.0]
    ks = ks_2samp(collapsed, drop.values.data)

    report = EquivalenceReport(
        p=p,
        epsilon=epsilon,
        n_samples=n_samples,
        fraction_ones_sdc=float(np.mean(sdc_values == 1.0)),
        fraction_ones_dropconnect=float(np.mean(drop.values.data == 1.0)),
        max_gated_value=float(gated.max()) if gated.size else 0.0,
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
    )
    logger.debug(f"Degenerate equivalence: {report.model_dump()}")
    return report

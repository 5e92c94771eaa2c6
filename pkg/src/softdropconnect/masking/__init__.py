"""Dropout, DropConnect and SoftDropConnect masking."""

from .layers import (
    Dropout,
    MaskedConv2d,
    MaskedDense,
    dropout_forward,
    masked_conv_forward,
    masked_dense_forward,
)
from .masks import (
    BERNOULLI_METHODS,
    MASK_METHODS,
    SDC_METHODS,
    EquivalenceReport,
    MaskSpec,
    MaskTensor,
    degenerate_equivalence_check,
    expected_mask_value,
    make_spec,
    mask_entries_valid,
    mask_rng,
    mask_variance,
    sample_mask,
)

__all__ = [
    "MaskSpec",
    "MaskTensor",
    "make_spec",
    "sample_mask",
    "expected_mask_value",
    "mask_variance",
    "mask_entries_valid",
    "mask_rng",
    "degenerate_equivalence_check",
    "EquivalenceReport",
    "masked_dense_forward",
    "masked_conv_forward",
    "dropout_forward",
    "MaskedDense",
    "MaskedConv2d",
    "Dropout",
    "MASK_METHODS",
    "BERNOULLI_METHODS",
    "SDC_METHODS",
]

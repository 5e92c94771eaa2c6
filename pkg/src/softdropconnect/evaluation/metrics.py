"""
Uncertainty metrics over Monte-Carlo softmax passes.

All entropies and mutual informations are in bits.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import entr

from ..utils.errors import ConfigurationError, DimensionError, DomainError
from ..utils.helpers import setup_logging

logger = setup_logging(__name__)

LN2 = math.log(2.0)
SUM_TOLERANCE = 1e-9


def _check_probabilities(p: np.ndarray, axis: int = -1) -> None:
    if (p < 0).any():
        raise DomainError(f"probabilities must be non-negative, found minimum {p.min()}")
    totals = p.sum(axis=axis)
    if np.max(np.abs(totals - 1.0), initial=0.0) > SUM_TOLERANCE:
        raise DomainError("probability vectors must sum to 1")


def _entropy_bits(p: np.ndarray, axis: int = -1) -> np.ndarray:
    return entr(p).sum(axis=axis) / LN2


def entropy(p: Sequence[float]) -> float:
    """−Σ p_k log2 p_k with 0·log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    _check_probabilities(p)
    return float(_entropy_bits(p))


def mutual_information(passes) -> float:
    """
    H[mean_t p_t] − mean_t H[p_t] for a [T,K] array of per-pass softmax rows.

    Clamped at 0 (only rounding can make it negative).
    """
    passes = np.asarray(passes, dtype=np.float64)
    if passes.ndim != 2 or passes.shape[0] == 0:
        raise DomainError(f"mutual_information needs a non-empty [T,K] array, got shape {passes.shape}")
    _check_probabilities(passes)
    value = _entropy_bits(passes.mean(axis=0)) - _entropy_bits(passes).mean()
    return max(float(value), 0.0)


class PredictiveSummary(BaseModel):
    """Aggregate of T Monte-Carlo passes for one input."""

    passes: List[List[float]]
    mean_softmax: List[float]
    votes: List[int]
    popular_class: int = Field(ge=0)
    class_counts: List[int]
    popular_softmax_values: List[float]
    mutual_information: float = Field(ge=0.0)
    mean_entropy: float
    predictive_entropy: float = Field(description="Entropy of the mean softmax (bits)")
    std_per_class: List[float]
    deterministic_warning: bool = False

    @classmethod
    def from_passes(cls, passes, deterministic_warning: bool = False) -> "PredictiveSummary":
        """
        Build the summary of a [T,K] array of softmax rows.

        Args:
            passes: Per-pass probability vectors
            deterministic_warning: Set when the passes came from a model without randomness

        Returns:
            PredictiveSummary
        """
        passes = np.asarray(passes, dtype=np.float64)
        if passes.ndim != 2 or passes.shape[0] == 0:
            raise DomainError(f"need a non-empty [T,K] array of passes, got shape {passes.shape}")
        _check_probabilities(passes)

        n_classes = passes.shape[1]
        mean_softmax = passes.mean(axis=0)
        votes = passes.argmax(axis=1)
        counts = np.bincount(votes, minlength=n_classes)
        popular = int(np.argmax(counts))
        predictive_entropy = float(_entropy_bits(mean_softmax))
        mean_entropy = float(_entropy_bits(passes).mean())

        return cls(
            passes=passes.tolist(),
            mean_softmax=mean_softmax.tolist(),
            votes=votes.tolist(),
            popular_class=popular,
            class_counts=counts.tolist(),
            popular_softmax_values=passes[:, popular].tolist(),
            mutual_information=max(predictive_entropy - mean_entropy, 0.0),
            mean_entropy=mean_entropy,
            predictive_entropy=predictive_entropy,
            std_per_class=passes.std(axis=0).tolist(),
            deterministic_warning=deterministic_warning,
        )

    @property
    def num_passes(self) -> int:
        return len(self.passes)

    @property
    def confidence(self) -> float:
        """Mean softmax probability of the popular class."""
        return self.mean_softmax[self.popular_class]

    @property
    def popular_std(self) -> float:
        """Standard deviation over passes of the popular-class probability."""
        return self.std_per_class[self.popular_class]


def histogram_counts(summary: PredictiveSummary, n_bins: int = 10) -> Tuple[List[int], List[int]]:
    """
    Class vote counts and the popular-class softmax histogram.

    Bins are equal-width over [0,1], left-closed, with the last bin also
    right-closed.
    """
    if n_bins < 1:
        raise ConfigurationError(f"n_bins must be >= 1, got {n_bins}")
    counts, _ = np.histogram(summary.popular_softmax_values, bins=n_bins, range=(0.0, 1.0))
    return list(summary.class_counts), counts.astype(int).tolist()


class HistogramAverage(BaseModel):
    """Vote and softmax histograms averaged over a dataset."""

    n_samples: int
    n_bins: int
    mean_popular_count: float = Field(description="Average votes for the popular class")
    mean_sorted_class_counts: List[float] = Field(description="Class counts sorted descending, averaged")
    mean_softmax_bin_counts: List[float]


def average_histograms(summaries: Sequence[PredictiveSummary], n_bins: int = 10) -> HistogramAverage:
    """Average the per-sample histograms of :func:`histogram_counts`."""
    if not summaries:
        raise DomainError("cannot average histograms of an empty set of summaries")
    class_rows, bin_rows = [], []
    for summary in summaries:
        classes, bins = histogram_counts(summary, n_bins)
        class_rows.append(sorted(classes, reverse=True))
        bin_rows.append(bins)
    class_rows_arr = np.asarray(class_rows, dtype=np.float64)
    return HistogramAverage(
        n_samples=len(summaries),
        n_bins=n_bins,
        mean_popular_count=float(class_rows_arr[:, 0].mean()),
        mean_sorted_class_counts=class_rows_arr.mean(axis=0).tolist(),
        mean_softmax_bin_counts=np.asarray(bin_rows, dtype=np.float64).mean(axis=0).tolist(),
    )


class ErrorSplit(BaseModel):
    """Uncertainty statistics of correct versus incorrect predictions."""

    n_correct: int
    n_incorrect: int
    mean_mi_correct: Optional[float] = None
    mean_mi_incorrect: Optional[float] = None
    mean_std_correct: Optional[float] = None
    mean_std_incorrect: Optional[float] = None


def uncertainty_error_split(summaries: Sequence[PredictiveSummary], labels: Sequence[int]) -> ErrorSplit:
    """Mean MI and popular-class std, separately for correct and incorrect popular votes."""
    if len(summaries) != len(labels):
        raise DimensionError(f"{len(summaries)} summaries but {len(labels)} labels")
    correct = np.array([s.popular_class == int(y) for s, y in zip(summaries, labels)], dtype=bool)
    mi = np.array([s.mutual_information for s in summaries])
    std = np.array([s.popular_std for s in summaries])

    def mean_of(values: np.ndarray, selector: np.ndarray) -> Optional[float]:
        return float(values[selector].mean()) if selector.any() else None

    return ErrorSplit(
        n_correct=int(correct.sum()),
        n_incorrect=int((~correct).sum()),
        mean_mi_correct=mean_of(mi, correct),
        mean_mi_incorrect=mean_of(mi, ~correct),
        mean_std_correct=mean_of(std, correct),
        mean_std_incorrect=mean_of(std, ~correct),
    )


class PixelUncertaintyMap(BaseModel):
    """
    Per-pixel maps over an [h,w] grid.

    ``mean_prediction`` is the mean softmax of the popular class and ``std``
    its standard deviation across passes.
    """

    mean_prediction: List[List[float]]
    std: List[List[float]]
    mutual_information: List[List[float]]
    popular_vote: List[List[int]]
    std_per_class: List[List[List[float]]]

    @property
    def mean_mutual_information(self) -> float:
        """Per-sample MI: mean over pixels."""
        return float(np.mean(self.mutual_information))


def pixelwise_uncertainty(
    passes,
    ground_truth=None,
) -> Tuple[PixelUncertaintyMap, Optional[np.ndarray]]:
    """
    Apply the per-sample metrics at every pixel of a segmentation output.

    Args:
        passes: Softmax passes [T,K,h,w]
        ground_truth: Optional class map [h,w]

    Returns:
        (maps, absolute-error map 1 − p̂[truth] or None)
    """
    passes = np.asarray(passes, dtype=np.float64)
    if passes.ndim != 4 or passes.shape[0] == 0:
        raise DimensionError(f"pixelwise_uncertainty expects [T,K,h,w], got {passes.shape}")
    _check_probabilities(passes, axis=1)
    n_classes, height, width = passes.shape[1:]

    mean = passes.mean(axis=0)
    votes = passes.argmax(axis=1)
    counts = np.stack([(votes == k).sum(axis=0) for k in range(n_classes)])
    popular = counts.argmax(axis=0)
    mi = np.maximum(_entropy_bits(mean, axis=0) - _entropy_bits(passes, axis=1).mean(axis=0), 0.0)
    std_per_class = passes.std(axis=0)
    rows, cols = np.indices((height, width))

    maps = PixelUncertaintyMap(
        mean_prediction=mean[popular, rows, cols].tolist(),
        std=std_per_class[popular, rows, cols].tolist(),
        mutual_information=mi.tolist(),
        popular_vote=popular.tolist(),
        std_per_class=std_per_class.tolist(),
    )

    abs_error = None
    if ground_truth is not None:
        truth = np.asarray(ground_truth, dtype=np.int64)
        if truth.shape != (height, width):
            raise DimensionError(f"ground truth shape {truth.shape} does not match grid {(height, width)}")
        if truth.min() < 0 or truth.max() >= n_classes:
            raise DimensionError(f"ground truth classes must lie in [0,{n_classes})")
        abs_error = 1.0 - mean[truth, rows, cols]
    return maps, abs_error


def dice_score(pred_mask, true_mask) -> float:
    """2|A∩B| / (|A|+|B|); two empty masks score 1."""
    pred = np.asarray(pred_mask).astype(bool)
    true = np.asarray(true_mask).astype(bool)
    if pred.shape != true.shape:
        raise DimensionError(f"dice masks differ in shape: {pred.shape} vs {true.shape}")
    total = pred.sum() + true.sum()
    if total == 0:
        return 1.0
    return float(2.0 * np.logical_and(pred, true).sum() / total)

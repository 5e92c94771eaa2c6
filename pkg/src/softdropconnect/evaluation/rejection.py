"""
Rejection-threshold analysis.

A prediction is retained at threshold τ when the mean softmax probability of
its popular-vote class is at least τ.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..utils.errors import DimensionError
from ..utils.helpers import setup_logging
from .metrics import PredictiveSummary

logger = setup_logging(__name__)

DEFAULT_POINTS = 101


def default_thresholds(points: int = DEFAULT_POINTS) -> List[float]:
    return np.linspace(0.0, 1.0, points).tolist()


class RejectionCurve(BaseModel):
    """Retained fraction and accuracy per threshold; accuracy is None when nothing is retained."""

    thresholds: List[float]
    retained_fraction: List[float]
    retained_count: List[int]
    retained_accuracy: List[Optional[float]]
    overall_accuracy: Optional[float] = Field(default=None)

    @model_validator(mode="after")
    def check_lengths(self) -> "RejectionCurve":
        n = len(self.thresholds)
        if not (len(self.retained_fraction) == len(self.retained_count) == len(self.retained_accuracy) == n):
            raise ValueError("rejection curve columns differ in length")
        return self

    def strictest_nonempty(self) -> Optional[Tuple[float, float]]:
        """(τ, accuracy) at the largest threshold that still retains a prediction."""
        for tau, acc in zip(reversed(self.thresholds), reversed(self.retained_accuracy)):
            if acc is not None:
                return tau, acc
        return None


def rejection_analysis(
    summaries: Sequence[PredictiveSummary],
    labels: Sequence[int],
    thresholds: Optional[Sequence[float]] = None,
) -> RejectionCurve:
    """
    Sweep thresholds over the popular-class confidence.

    Args:
        summaries: One PredictiveSummary per sample
        labels: True classes aligned with ``summaries``
        thresholds: Ascending thresholds (default: 101 points on [0,1])

    Returns:
        RejectionCurve
    """
    if len(summaries) != len(labels):
        raise DimensionError(f"{len(summaries)} summaries but {len(labels)} labels")
    taus = sorted(float(t) for t in (thresholds if thresholds is not None else default_thresholds()))

    confidence = np.array([s.confidence for s in summaries], dtype=np.float64)
    correct = np.array([s.popular_class == int(y) for s, y in zip(summaries, labels)], dtype=bool)
    total = len(summaries)

    fractions, counts, accuracies = [], [], []
    for tau in taus:
        kept = confidence >= tau
        n_kept = int(kept.sum())
        counts.append(n_kept)
        fractions.append(n_kept / total if total else 0.0)
        accuracies.append(float(correct[kept].mean()) if n_kept else None)

    if total and counts[-1] == 0:
        logger.debug(f"No predictions retained at threshold {taus[-1]:.2f}")

    return RejectionCurve(
        thresholds=taus,
        retained_fraction=fractions,
        retained_count=counts,
        retained_accuracy=accuracies,
        overall_accuracy=float(correct.mean()) if total else None,
    )

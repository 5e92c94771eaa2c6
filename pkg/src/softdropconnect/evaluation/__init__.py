"""Monte-Carlo inference and uncertainty metrics."""

from .inference import mc_predict, mc_predict_batch, predict_passes
from .metrics import (
    ErrorSplit,
    HistogramAverage,
    PixelUncertaintyMap,
    PredictiveSummary,
    average_histograms,
    dice_score,
    entropy,
    histogram_counts,
    mutual_information,
    pixelwise_uncertainty,
    uncertainty_error_split,
)
from .rejection import RejectionCurve, default_thresholds, rejection_analysis
from .report import render_comparison_report, render_metrics_table, render_summary_table

__all__ = [
    "PredictiveSummary",
    "PixelUncertaintyMap",
    "HistogramAverage",
    "ErrorSplit",
    "RejectionCurve",
    "entropy",
    "mutual_information",
    "pixelwise_uncertainty",
    "dice_score",
    "histogram_counts",
    "average_histograms",
    "uncertainty_error_split",
    "rejection_analysis",
    "default_thresholds",
    "predict_passes",
    "mc_predict",
    "mc_predict_batch",
    "render_summary_table",
    "render_metrics_table",
    "render_comparison_report",
]

"""Tests for uncertainty metrics and rejection analysis."""

import math

import numpy as np
import pytest

from softdropconnect.evaluation import (
    PredictiveSummary,
    average_histograms,
    default_thresholds,
    dice_score,
    entropy,
    histogram_counts,
    mutual_information,
    pixelwise_uncertainty,
    rejection_analysis,
    render_metrics_table,
    uncertainty_error_split,
)
from softdropconnect.utils.errors import DimensionError, DomainError


def _direct_mi(passes):
    """H[mean] − mean H, evaluated term by term in base 2."""
    T, K = len(passes), len(passes[0])
    mean = [sum(passes[t][k] for t in range(T)) / T for k in range(K)]

    def h(p):
        return -sum(x * math.log2(x) for x in p if x > 0)

    return h(mean) - sum(h(row) for row in passes) / T


def _summary(rows):
    return PredictiveSummary.from_passes(np.asarray(rows, dtype=np.float64))


class TestMutualInformation:
    """Test cases for entropy and mutual information."""

    def test_worked_example(self):
        """(0.8,0.2)/(0.6,0.4): 0.8813 − 0.8464 = 0.0349 bits."""
        assert mutual_information([[0.8, 0.2], [0.6, 0.4]]) == pytest.approx(0.0349, abs=5e-5)

    def test_random_instances_match_direct_evaluation(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            T, K = rng.integers(1, 8), rng.integers(2, 6)
            passes = rng.dirichlet(np.ones(K), size=T)
            expected = max(_direct_mi(passes.tolist()), 0.0)
            assert abs(mutual_information(passes) - expected) < 1e-12

    def test_identical_passes_give_zero(self):
        assert mutual_information([[0.3, 0.7]] * 5) == pytest.approx(0.0, abs=1e-15)

    def test_entropy(self):
        assert entropy([0.5, 0.5]) == pytest.approx(1.0)
        assert entropy([1.0, 0.0]) == 0.0

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            mutual_information(np.zeros((0, 3)))
        with pytest.raises(DomainError):
            mutual_information([[0.5, 0.6]])
        with pytest.raises(DomainError):
            entropy([1.2, -0.2])


class TestPredictiveSummary:
    """Test cases for PredictiveSummary."""

    def test_fields(self):
        summary = _summary([[0.7, 0.2, 0.1], [0.4, 0.5, 0.1], [0.6, 0.3, 0.1]])
        assert summary.num_passes == 3
        assert summary.votes == [0, 1, 0]
        assert summary.class_counts == [2, 1, 0]
        assert summary.popular_class == 0
        assert summary.popular_softmax_values == [0.7, 0.4, 0.6]
        np.testing.assert_allclose(summary.mean_softmax, [17 / 30, 1 / 3, 0.1])
        assert summary.confidence == pytest.approx(17 / 30)
        assert summary.popular_std == pytest.approx(np.std([0.7, 0.4, 0.6]))
        assert summary.mutual_information == pytest.approx(
            summary.predictive_entropy - summary.mean_entropy
        )
        assert not summary.deterministic_warning

    def test_histograms(self):
        """The last bin is closed on the right, so 1.0 lands in it."""
        summary = _summary([[1.0, 0.0], [0.95, 0.05], [0.05, 0.95]])
        classes, bins = histogram_counts(summary, n_bins=10)
        assert classes == [2, 1]
        assert bins[-1] == 2
        assert bins[0] == 1
        assert sum(bins) == 3

    def test_histogram_bins_are_left_closed(self):
        """A value on an inner edge (0.1 with 10 bins) falls into the bin above it."""
        summary = _summary([[1.0, 0.0], [1.0, 0.0], [0.1, 0.9]])
        _, bins = histogram_counts(summary, n_bins=10)
        assert bins == [0, 1, 0, 0, 0, 0, 0, 0, 0, 2]

    def test_average_histograms(self):
        summaries = [_summary([[0.9, 0.1], [0.8, 0.2]]), _summary([[0.1, 0.9], [0.6, 0.4]])]
        average = average_histograms(summaries, n_bins=5)
        assert average.n_samples == 2
        assert average.mean_popular_count == pytest.approx(1.5)
        assert average.mean_sorted_class_counts == [1.5, 0.5]
        assert sum(average.mean_softmax_bin_counts) == pytest.approx(2.0)

    def test_error_split(self):
        confident = _summary([[0.9, 0.1]] * 4)
        unsure = _summary([[0.9, 0.1], [0.2, 0.8], [0.4, 0.6], [0.3, 0.7]])
        split = uncertainty_error_split([confident, unsure], [0, 0])
        assert split.n_correct == 1
        assert split.n_incorrect == 1
        assert split.mean_mi_correct == pytest.approx(0.0, abs=1e-12)
        assert split.mean_mi_incorrect > 0.0


class TestRejection:
    """Test cases for rejection_analysis."""

    def test_curve(self):
        summaries = [
            _summary([[0.95, 0.05]]),
            _summary([[0.7, 0.3]]),
            _summary([[0.55, 0.45]]),
            _summary([[0.6, 0.4]]),
        ]
        curve = rejection_analysis(summaries, [0, 0, 1, 0], [0.0, 0.6, 0.9, 1.0])
        assert curve.retained_count == [4, 3, 1, 0]
        assert curve.retained_fraction == [1.0, 0.75, 0.25, 0.0]
        assert curve.retained_accuracy[0] == pytest.approx(0.75)
        assert curve.retained_accuracy[1] == pytest.approx(1.0)
        assert curve.retained_accuracy[-1] is None
        assert curve.strictest_nonempty() == (0.9, 1.0)
        assert curve.overall_accuracy == pytest.approx(0.75)

    def test_retained_fraction_non_increasing(self):
        rng = np.random.default_rng(3)
        summaries = [_summary(rng.dirichlet(np.ones(4), size=5)) for _ in range(50)]
        labels = rng.integers(0, 4, size=50)
        curve = rejection_analysis(summaries, labels, default_thresholds())
        assert len(curve.thresholds) == 101
        assert all(a >= b for a, b in zip(curve.retained_fraction, curve.retained_fraction[1:]))

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            rejection_analysis([_summary([[0.5, 0.5]])], [0, 1])


class TestSegmentationMetrics:
    """Test cases for pixelwise uncertainty and dice."""

    def test_pixelwise_maps(self):
        passes = np.zeros((2, 2, 1, 2))
        passes[:, 0, 0, 0] = [0.9, 0.7]
        passes[:, 1, 0, 0] = [0.1, 0.3]
        passes[:, 0, 0, 1] = [0.2, 0.2]
        passes[:, 1, 0, 1] = [0.8, 0.8]
        maps, abs_error = pixelwise_uncertainty(passes, ground_truth=[[0, 0]])

        assert maps.popular_vote == [[0, 1]]
        np.testing.assert_allclose(maps.mean_prediction, [[0.8, 0.8]])
        np.testing.assert_allclose(maps.std, [[0.1, 0.0]], atol=1e-15)
        assert maps.mutual_information[0][1] == pytest.approx(0.0, abs=1e-12)
        assert maps.mutual_information[0][0] == pytest.approx(
            mutual_information([[0.9, 0.1], [0.7, 0.3]])
        )
        np.testing.assert_allclose(abs_error, [[0.2, 0.8]])

    def test_pixelwise_shape_checks(self):
        with pytest.raises(DimensionError):
            pixelwise_uncertainty(np.full((2, 2, 3), 0.5))
        with pytest.raises(DimensionError):
            pixelwise_uncertainty(np.full((1, 2, 1, 1), 0.5), ground_truth=[[0, 1]])

    def test_dice(self):
        assert dice_score([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(0.5)
        assert dice_score(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0
        with pytest.raises(DimensionError):
            dice_score([1, 0], [1, 0, 0])


def test_metrics_table_renders():
    class Record:
        split, accuracy, mean_mi_bits, mean_entropy_bits = "test", 0.9, 0.05, None

    table = render_metrics_table([Record()])
    assert table.row_count == 1

"""Tests for mask laws and masked layers."""

import numpy as np
import pytest

from softdropconnect.core import ops
from softdropconnect.core.layers import ForwardContext
from softdropconnect.core.params import ParamStore
from softdropconnect.core.rng import SeedLineage, derive_seed
from softdropconnect.core.tensor import Tensor
from softdropconnect.masking import (
    Dropout,
    MaskedDense,
    degenerate_equivalence_check,
    dropout_forward,
    expected_mask_value,
    make_spec,
    mask_entries_valid,
    mask_variance,
    masked_conv_forward,
    masked_dense_forward,
    sample_mask,
)
from softdropconnect.utils.errors import ConfigurationError, DegenerateMaskError, DimensionError

METHODS = ("dropout", "dropconnect", "sdc", "sdc_strong", "sdc_weak")
P_VALUES = (0.05, 0.25, 0.5)
N_MASKS = 100_000


class TestMaskSpec:
    """Test cases for MaskSpec validation."""

    def test_fixed_bounds(self):
        assert make_spec("sdc_strong", 0.5).bounds == (0.0, 0.5)
        assert make_spec("sdc_weak", 0.5).bounds == (0.5, 1.0)
        assert make_spec("sdc", 0.5).bounds == (0.0, 1.0)
        assert make_spec("dropconnect", 0.5).bounds is None

    def test_invalid_specs(self):
        with pytest.raises(ConfigurationError):
            make_spec("dropout", 1.5)
        with pytest.raises(ConfigurationError):
            make_spec("dropconnect", 0.5, (0.0, 1.0))
        with pytest.raises(ConfigurationError):
            make_spec("sdc_weak", 0.5, (0.2, 0.4))
        with pytest.raises(ConfigurationError):
            make_spec("sdc", 0.5, (0.6, 0.4))

    def test_expected_values(self):
        assert expected_mask_value(make_spec("dropconnect", 0.25)) == pytest.approx(0.75)
        assert expected_mask_value(make_spec("sdc_weak", 0.5)) == pytest.approx(0.875)
        assert expected_mask_value(make_spec("sdc_strong", 0.5)) == pytest.approx(0.625)
        assert expected_mask_value(make_spec("sdc", 0.5)) == pytest.approx(0.75)

    def test_normalized_variance_ordering(self):
        """Weak softening perturbs least, Bernoulli masking most."""
        weak = mask_variance(make_spec("sdc_weak", 0.5), normalized=True)
        generic = mask_variance(make_spec("sdc", 0.5), normalized=True)
        bernoulli = mask_variance(make_spec("dropconnect", 0.5), normalized=True)
        assert weak < generic < bernoulli
        assert bernoulli == pytest.approx(1.0)


class TestSampling:
    """Test cases for sample_mask."""

    @pytest.mark.parametrize("method", METHODS)
    def test_entries_lie_in_support(self, method):
        spec = make_spec(method, 0.5)
        mask = sample_mask(spec, (50, 40), derive_seed(0))
        assert mask.shape == (50, 40)
        assert mask_entries_valid(spec, mask.values.data)

    def test_same_lineage_same_mask(self):
        spec = make_spec("sdc", 0.3)
        lineage = SeedLineage(master_seed=7, pass_index=2, layer_index=5)
        a = sample_mask(spec, (10, 10), lineage)
        b = sample_mask(spec, (10, 10), lineage)
        np.testing.assert_array_equal(a.values.data, b.values.data)
        assert a.seed_lineage == lineage

        other = sample_mask(spec, (10, 10), SeedLineage(master_seed=7, pass_index=3, layer_index=5))
        assert not np.array_equal(a.values.data, other.values.data)

    def test_p_zero_gives_ones(self):
        mask = sample_mask(make_spec("sdc_weak", 0.0), (20,), derive_seed(1))
        np.testing.assert_array_equal(mask.values.data, np.ones(20))

    def test_degenerate_bounds_match_dropconnect(self):
        """An sdc law collapsed onto (0, ε) behaves like DropConnect."""
        report = degenerate_equivalence_check(N_MASKS, p=0.5, epsilon=1e-9)
        assert report.max_gated_value < 1e-9
        assert report.fraction_ones_sdc == pytest.approx(report.fraction_ones_dropconnect, abs=0.01)
        assert report.ks_statistic < 0.01


class TestExpectationPreservation:
    """Monte-Carlo mean of a masked layer matches the unmasked output."""

    W = np.linspace(0.5, 1.5, 12).reshape(3, 4)
    V = np.linspace(1.0, 2.0, 4)

    @pytest.mark.parametrize("p", P_VALUES)
    @pytest.mark.parametrize("method", [m for m in METHODS if m != "dropout"])
    def test_masked_dense(self, method, p):
        """N_MASKS stacked copies of a 4→3 layer, each with its own weight mask."""
        spec = make_spec(method, p)
        tiled = np.tile(self.W, (N_MASKS, 1))
        mask = sample_mask(spec, tiled.shape, derive_seed(3, 1))
        out = masked_dense_forward(self.V[np.newaxis], tiled, None, spec, mask).data
        mean = out.reshape(N_MASKS, 3).mean(axis=0)
        np.testing.assert_allclose(mean, self.W @ self.V, rtol=0.01)

    @pytest.mark.parametrize("p", P_VALUES)
    def test_dropout(self, p):
        spec = make_spec("dropout", p)
        batch = np.tile(self.V, (N_MASKS, 1))
        mask = sample_mask(spec, batch.shape, derive_seed(3, 2))
        out = ops.dense(dropout_forward(batch, spec, mask), self.W).data
        np.testing.assert_allclose(out.mean(axis=0), self.W @ self.V, rtol=0.01)

    @pytest.mark.parametrize("method", ["dropconnect", "sdc_weak"])
    def test_masked_conv(self, method):
        """N_MASKS output channels share one kernel under independent masks."""
        spec = make_spec(method, 0.5)
        x = np.linspace(0.1, 1.6, 16).reshape(1, 1, 4, 4)
        kernel = np.linspace(0.2, 1.0, 9).reshape(1, 1, 3, 3)
        tiled = np.tile(kernel, (N_MASKS, 1, 1, 1))
        mask = sample_mask(spec, tiled.shape, derive_seed(3, 3))
        out = masked_conv_forward(x, tiled, spec, mask).data
        np.testing.assert_allclose(out[0].mean(axis=0), ops.conv2d(x, kernel).data[0, 0], rtol=0.01)


class TestMaskVariance:
    """Empirical per-entry variance of the normalized mask."""

    N_ENTRIES = 1_000_000

    @pytest.mark.parametrize("p", P_VALUES)
    def test_empirical_matches_closed_form_and_orders(self, p):
        empirical = {}
        for method in ("dropconnect", "sdc", "sdc_weak"):
            spec = make_spec(method, p)
            values = sample_mask(spec, (self.N_ENTRIES,), derive_seed(9, int(p * 100))).values.data
            empirical[method] = float(np.var(values / expected_mask_value(spec)))
            assert empirical[method] == pytest.approx(mask_variance(spec, normalized=True), rel=0.05)
        assert empirical["dropconnect"] > empirical["sdc"] > empirical["sdc_weak"]


class TestMaskedForward:
    """Test cases for the masked forwards and layers."""

    def test_masked_dense_formula(self):
        """((z ⊙ w) · v) / E[z] + bias, the bias left unnormalized."""
        rng = np.random.default_rng(0)
        v, w, b = rng.standard_normal((2, 4)), rng.standard_normal((3, 4)), rng.standard_normal(3)
        spec = make_spec("sdc_weak", 0.5)
        mask = sample_mask(spec, (3, 4), rng)
        out = masked_dense_forward(v, w, Tensor(b), spec, mask).data
        expected = v @ (mask.values.data * w).T / 0.875 + b
        np.testing.assert_allclose(out, expected)

    def test_mask_shape_mismatch(self):
        spec = make_spec("dropconnect", 0.5)
        with pytest.raises(DimensionError):
            masked_dense_forward(np.ones((1, 4)), np.ones((3, 4)), None, spec, sample_mask(spec, (4, 3), derive_seed(0)))

    def test_degenerate_law_rejected(self):
        spec = make_spec("dropconnect", 1.0)
        with pytest.raises(DegenerateMaskError):
            MaskedDense("fc", 4, 3, ParamStore(), spec)
        with pytest.raises(DegenerateMaskError):
            dropout_forward(np.ones((1, 3)), spec, sample_mask(spec, (1, 3), derive_seed(0)))

    def test_layer_is_deterministic_in_eval_mode(self):
        layer = MaskedDense("fc", 4, 3, ParamStore(), make_spec("dropconnect", 0.5))
        x = Tensor(np.ones((2, 4)))
        out = layer(x, ForwardContext(mode="eval")).data
        np.testing.assert_allclose(out, x.data @ layer.weight.data.T + layer.bias.data)

    def test_weight_mask_shared_within_pass(self):
        """Two chunks of one pass see the same weight mask."""
        layer = MaskedDense("fc", 4, 3, ParamStore(), make_spec("sdc", 0.5))
        ctx = ForwardContext(mode="mc", master_seed=3, pass_index=1)
        x = np.random.default_rng(0).standard_normal((4, 4))
        together = layer(Tensor(x), ctx).data
        fresh = ForwardContext(mode="mc", master_seed=3, pass_index=1)
        first = layer(Tensor(x[:2]), fresh).data
        second = layer(Tensor(x[2:]), fresh).data
        np.testing.assert_allclose(together, np.vstack([first, second]))

    def test_dropout_rows_keyed_by_sample_offset(self):
        """Splitting a batch at any row, with matching offsets, reproduces its masks."""
        layer = Dropout("drop", make_spec("dropout", 0.5))
        x = np.ones((6, 5))
        together = layer(Tensor(x), ForwardContext(mode="mc", master_seed=4, pass_index=2)).data
        first = layer(Tensor(x[:3]), ForwardContext(mode="mc", master_seed=4, pass_index=2)).data
        second = layer(
            Tensor(x[3:]), ForwardContext(mode="mc", master_seed=4, pass_index=2, sample_offset=3)
        ).data
        np.testing.assert_array_equal(together, np.vstack([first, second]))
        assert not np.array_equal(first, second)

    def test_dropout_layer_p_zero_is_identity(self):
        layer = Dropout("drop", make_spec("dropout", 0.0))
        assert not layer.stochastic
        x = Tensor(np.arange(6.0).reshape(2, 3))
        assert layer(x, ForwardContext(mode="train")) is x

"""Tests for Monte-Carlo inference."""

import numpy as np
import pytest

from softdropconnect.evaluation import mc_predict, mc_predict_batch, predict_passes
from softdropconnect.harness.model import build_mlp
from softdropconnect.utils.errors import ConfigurationError


@pytest.fixture
def inputs():
    return np.random.default_rng(0).random((7, 2))


class TestPredictPasses:
    """Test cases for predict_passes and its scheduling independence."""

    def test_shape_and_normalization(self, inputs):
        model = build_mlp("sdc", (2,), 3, p=0.5, hidden_units=8)
        passes = predict_passes(model, inputs, T=4, master_seed=1)
        assert passes.shape == (7, 4, 3)
        np.testing.assert_allclose(passes.sum(axis=2), 1.0)

    def test_same_seed_same_passes(self, inputs):
        model = build_mlp("dropconnect", (2,), 3, p=0.5, hidden_units=8)
        a = predict_passes(model, inputs, T=5, master_seed=3)
        b = predict_passes(model, inputs, T=5, master_seed=3)
        c = predict_passes(model, inputs, T=5, master_seed=4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_chunking_and_threads_do_not_change_results(self, inputs):
        """Weight masks depend only on (seed, pass, layer)."""
        model = build_mlp("sdc_weak", (2,), 3, p=0.5, hidden_units=8)
        reference = predict_passes(model, inputs, T=6, master_seed=2, batch_size=100)
        np.testing.assert_allclose(predict_passes(model, inputs, T=6, master_seed=2, batch_size=2), reference)
        np.testing.assert_allclose(
            predict_passes(model, inputs, T=6, master_seed=2, workers=3), reference
        )

    def test_dropout_masks_follow_the_sample(self, inputs):
        """Activation masks depend on the sample index, not on the chunk it lands in."""
        model = build_mlp("dropout", (2,), 3, p=0.5, hidden_units=8)
        reference = predict_passes(model, inputs, T=6, master_seed=2, batch_size=100)
        np.testing.assert_allclose(predict_passes(model, inputs, T=6, master_seed=2, batch_size=2), reference)
        np.testing.assert_allclose(predict_passes(model, inputs, T=6, master_seed=2, batch_size=3), reference)

        repeated = np.tile(inputs[0], (4, 1))
        passes = predict_passes(model, repeated, T=6, master_seed=2, batch_size=2)
        assert not np.allclose(passes[0], passes[2])

    def test_bbb_passes_vary(self, inputs):
        model = build_mlp("bbb", (2,), 3, hidden_units=8, rho_init=-1.0)
        passes = predict_passes(model, inputs, T=3, master_seed=0)
        assert not np.allclose(passes[:, 0], passes[:, 1])

    def test_invalid_counts(self, inputs):
        model = build_mlp("none", (2,), 3, hidden_units=8)
        with pytest.raises(ConfigurationError):
            predict_passes(model, inputs, T=0, master_seed=0)
        with pytest.raises(ConfigurationError):
            predict_passes(model, inputs, T=1, master_seed=0, batch_size=0)


class TestSummaries:
    """Test cases for mc_predict and mc_predict_batch."""

    def test_deterministic_model_warns(self, inputs):
        model = build_mlp("none", (2,), 3, hidden_units=8)
        summaries = mc_predict_batch(model, inputs, T=5, master_seed=0)
        assert len(summaries) == 7
        assert all(s.deterministic_warning for s in summaries)
        assert all(s.mutual_information == pytest.approx(0.0, abs=1e-12) for s in summaries)

    def test_single_pass_does_not_warn(self, inputs):
        model = build_mlp("none", (2,), 3, hidden_units=8)
        assert not mc_predict_batch(model, inputs, T=1, master_seed=0)[0].deterministic_warning

    def test_p_zero_masked_model_is_not_stochastic(self, inputs):
        model = build_mlp("dropconnect", (2,), 3, p=0.0, hidden_units=8)
        assert not model.is_stochastic
        assert mc_predict_batch(model, inputs, T=3, master_seed=0)[0].deterministic_warning

    def test_single_input_matches_batch(self, inputs):
        model = build_mlp("sdc", (2,), 3, p=0.5, hidden_units=8)
        single = mc_predict(model, inputs[0], T=8, master_seed=5)
        batched = mc_predict_batch(model, inputs, T=8, master_seed=5)[0]
        assert single.num_passes == 8
        np.testing.assert_allclose(single.passes, batched.passes)
        assert single.mutual_information == pytest.approx(batched.mutual_information)

    def test_single_input_matches_batch_with_dropout(self, inputs):
        model = build_mlp("dropout", (2,), 3, p=0.5, hidden_units=8)
        single = mc_predict(model, inputs[0], T=8, master_seed=5)
        batched = mc_predict_batch(model, inputs, T=8, master_seed=5, batch_size=3)[0]
        np.testing.assert_allclose(single.passes, batched.passes)

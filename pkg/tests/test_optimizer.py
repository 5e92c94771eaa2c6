"""Tests for the Adadelta optimizer."""

import math

import numpy as np
import pytest

from softdropconnect.core.params import ParamStore
from softdropconnect.core.tensor import Tensor
from softdropconnect.harness.optimizer import Adadelta, AdadeltaState, adadelta_step
from softdropconnect.utils.errors import DimensionError, NumericalError


def _reference_trajectory(w, steps, rho=0.9, eps=1e-6):
    """Scalar Adadelta on f(w) = w², written out longhand."""
    eg2 = ed2 = 0.0
    trajectory = []
    for _ in range(steps):
        g = 2.0 * w
        eg2 = rho * eg2 + (1 - rho) * g * g
        delta = -math.sqrt(ed2 + eps) / math.sqrt(eg2 + eps) * g
        ed2 = rho * ed2 + (1 - rho) * delta * delta
        w += delta
        trajectory.append(w)
    return trajectory


class TestAdadelta:
    """Test cases for adadelta_step and the Adadelta wrapper."""

    def test_first_step(self):
        w = Tensor(np.array([1.0]))
        adadelta_step({"w": w}, {"w": np.array([1.0])}, AdadeltaState())
        assert w.data[0] == pytest.approx(1.0 - math.sqrt(1e-6) / math.sqrt(0.1 + 1e-6), abs=1e-12)

    def test_quadratic_trajectory(self):
        store = ParamStore()
        w = store.add("w", np.array([1.5]))
        optimizer = Adadelta(store)
        expected = _reference_trajectory(1.5, 10)

        for step in range(10):
            optimizer.zero_grad()
            w.grad = 2.0 * w.data
            optimizer.step()
            assert w.data[0] == pytest.approx(expected[step], abs=1e-12)
        assert optimizer.state.steps == 10

    def test_missing_gradient_counts_as_zero(self):
        w = Tensor(np.array([2.0, -1.0]))
        adadelta_step({"w": w}, {"w": None}, AdadeltaState())
        np.testing.assert_array_equal(w.data, [2.0, -1.0])

    def test_non_finite_gradient(self):
        a = Tensor(np.array([1.0]))
        b = Tensor(np.array([1.0]))
        with pytest.raises(NumericalError) as excinfo:
            adadelta_step({"a": a, "b": b}, {"a": np.array([0.5]), "b": np.array([np.nan])},
                          AdadeltaState(), epoch=2, batch=7)
        assert excinfo.value.parameter == "b"
        assert excinfo.value.epoch == 2
        assert a.data[0] == 1.0

    def test_gradient_shape_mismatch_leaves_parameters_untouched(self):
        a = Tensor(np.array([1.0]))
        b = Tensor(np.array([1.0, 2.0]))
        state = AdadeltaState()
        with pytest.raises(DimensionError):
            adadelta_step({"a": a, "b": b}, {"a": np.array([0.5]), "b": np.array([0.5])}, state)
        assert a.data[0] == 1.0
        assert state.square_avg == {}
        assert state.steps == 0

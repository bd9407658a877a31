import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import FitError, NonFiniteGradientError
from core.fit_config import FitConfig
from core.optimizer import AdamState, adam_step


@pytest.fixture
def config():
    return FitConfig(adam_alpha=1e-4)


def test_zero_gradient_leaves_params(config):
    params = np.array([[1.0, -2.0, 0.5]])
    updated, state = adam_step(params, np.zeros_like(params), AdamState.zeros_like(params), config)
    np.testing.assert_array_equal(updated, params)
    assert state.t == 1


def test_first_step_moves_by_alpha(config):
    params = np.zeros((4, 3))
    grads = np.linspace(-3.0, 3.0, 12).reshape(4, 3) + 0.1
    updated, _ = adam_step(params, grads, AdamState.zeros_like(params), config)
    np.testing.assert_allclose(updated, -1e-4 * np.sign(grads), rtol=1e-6)


def test_opposite_gradients_drift_less_than_two_steps(config):
    params = np.zeros(5)
    grads = np.array([0.3, -1.0, 2.0, 1e-3, -7.0])
    state = AdamState.zeros_like(params)
    once, state = adam_step(params, grads, state, config)
    twice, state = adam_step(once, -grads, state, config)
    assert state.t == 2
    assert np.all(np.abs(twice) < 2e-4)
    assert np.all(state.v >= 0)


def test_inputs_are_not_modified(config):
    params = np.ones(3)
    state = AdamState.zeros_like(params)
    adam_step(params, np.ones(3), state, config)
    np.testing.assert_array_equal(params, np.ones(3))
    assert state.t == 0 and not state.m.any()


def test_non_finite_gradient_names_iteration(config):
    params = np.zeros(3)
    with pytest.raises(NonFiniteGradientError) as info:
        adam_step(params, np.array([0.0, np.nan, 0.0]), AdamState.zeros_like(params), config, iteration=12)
    assert info.value.iteration == 12
    assert "iteration 12" in str(info.value)


def test_shape_mismatch(config):
    with pytest.raises(FitError):
        adam_step(np.zeros(3), np.zeros(4), AdamState.zeros_like(np.zeros(3)), config)


class TestFitConfig:
    def test_defaults(self):
        config = FitConfig()
        assert config.sigma == 3e-5
        assert config.adam_alpha == 1e-4
        assert (config.adam_beta1, config.adam_beta2, config.adam_eps) == (0.9, 0.999, 1e-8)
        assert config.weights.lambda_ == 0.01 and config.weights.mu == 0.001
        assert not config.color_enabled

    @pytest.mark.parametrize("options", [
        {"adam_beta1": 1.0},
        {"adam_beta2": 0.0},
        {"adam_alpha": 0.0},
        {"iterations": -1},
        {"sigma": -1e-5},
        {"sigma_schedule": [(10, 1e-3), (10, 1e-4)]},
        {"sigma_schedule": [(0, -1.0)]},
    ])
    def test_invalid(self, options):
        with pytest.raises(ValidationError):
            FitConfig(**options)

    def test_zero_iterations_allowed(self):
        assert FitConfig(iterations=0).iterations == 0

    def test_sigma_schedule(self):
        config = FitConfig(sigma=1e-2, sigma_schedule=[(100, 1e-3), (500, 1e-4)])
        assert config.sigma_at(0) == 1e-2
        assert config.sigma_at(99) == 1e-2
        assert config.sigma_at(100) == 1e-3
        assert config.sigma_at(499) == 1e-3
        assert config.sigma_at(10_000) == 1e-4

    def test_without_schedule_sigma_is_fixed(self):
        config = FitConfig(sigma=2e-4)
        assert {config.sigma_at(i) for i in (0, 10, 5000)} == {2e-4}

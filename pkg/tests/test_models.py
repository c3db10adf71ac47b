"""Model forward passes, exact gradients, Adam and checkpoints."""
import math

import numpy as np
import pytest

from core.mathops import softmax
from core.rng import PURPOSE_INIT, RngStream
from models.base import FlatParams
from models.checkpoint import load_checkpoint, save_checkpoint
from models.cnn import TinyCnn
from models.factory import build_model, initialize_model
from models.layers import activation, avg_pool, conv2d, layer_norm
from models.linear import LinearModel
from models.mlp import MlpModel
from models.optim import AdamState, adam_step
from models.training import cross_entropy, forward, gradients
from utils.errors import ConfigurationError, InvalidInputError


def max_relative_error(model, X, labels, coords):
    """Worst analytic-vs-central-difference error over the given flat coordinates.

    Errors are scaled by |analytic| + |numeric| floored at 1e-3, so coordinates
    whose gradient is smaller than that floor are held to an absolute bound of
    tolerance * 1e-3 instead of a relative one.
    """
    analytic = gradients(model, X, labels)
    vector = model.flat().vector
    worst = 0.0
    for k in coords:
        h = 1e-5 * max(1.0, abs(vector[k]))
        plus, minus = vector.copy(), vector.copy()
        plus[k] += h
        minus[k] -= h
        loss_plus = cross_entropy(model.with_flat(plus).predict_proba(X), labels)
        loss_minus = cross_entropy(model.with_flat(minus).predict_proba(X), labels)
        numeric = (loss_plus - loss_minus) / (2 * h)
        error = abs(analytic[k] - numeric) / max(abs(analytic[k]) + abs(numeric), 1e-3)
        worst = max(worst, error)
    return worst


def sample_coords(size, rng, count=400):
    if size <= count:
        return range(size)
    return rng.choice(size, size=count, replace=False)


def small_cnn(seed=0):
    return TinyCnn.initialize(RngStream(seed, (PURPOSE_INIT,)), image_size=8, filters=2, kernel=3,
                              stride=1, padding=0, pool=2, classes=3)


class TestForward:
    def test_zero_weights_give_uniform(self, rng):
        p = forward(LinearModel.zeros(), rng.uniform(size=784))
        np.testing.assert_allclose(p, np.full(10, 0.1))

    def test_two_class_hand_computation(self):
        W = np.array([[0.5, -1.0], [2.0, 0.25]])
        model = LinearModel({'W': W}, in_features=2, classes=2)
        x = np.array([0.2, 0.6])
        z = W @ x
        expected = np.exp(z) / np.exp(z).sum()
        np.testing.assert_allclose(forward(model, x), expected, atol=1e-12)

    def test_image_and_flat_views_agree(self, rng):
        model = LinearModel.initialize(RngStream(1, (PURPOSE_INIT,)))
        image = rng.uniform(size=(28, 28))
        np.testing.assert_array_equal(forward(model, image), forward(model, image.ravel()))

    @pytest.mark.parametrize('kind', ['linear', 'mlp', 'cnn'])
    def test_outputs_are_distributions(self, kind, rng):
        model = initialize_model(kind, RngStream(3, (PURPOSE_INIT,)))
        probs = model.predict_proba(rng.uniform(size=(4, 28, 28)))
        assert probs.shape == (4, 10)
        assert np.all((probs >= 0) & (probs <= 1))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_cnn_is_layer_composition(self, rng):
        model = small_cnn(seed=4)
        p = dict(model.params)
        p['ln_gamma'] = rng.uniform(0.5, 1.5, size=2)
        p['ln_beta'] = rng.normal(scale=0.2, size=2)
        p['fc_b'] = rng.normal(scale=0.1, size=3)
        model = model.with_params(p)
        X = rng.uniform(size=(5, 8, 8))

        expected = []
        for image in X:
            maps = conv2d(image, p['kernels'])
            size = maps.shape[-1] ** 2
            normed = layer_norm(maps.ravel(), np.repeat(p['ln_gamma'], size), np.repeat(p['ln_beta'], size))
            pooled = avg_pool(activation('gelu', normed.reshape(maps.shape)), 2, 2)
            expected.append(softmax(p['fc_W'] @ pooled.ravel() + p['fc_b']))

        np.testing.assert_allclose(model.predict_proba(X), np.array(expected), atol=1e-12)

    def test_shape_mismatch_names_dims(self):
        with pytest.raises(InvalidInputError) as info:
            LinearModel.zeros().predict_proba(np.zeros((2, 10)))
        assert '784' in str(info.value)
        assert '(2, 10)' in str(info.value)


class TestCrossEntropy:
    def test_perfect_predictions(self):
        assert cross_entropy(np.eye(3), [0, 1, 2]) == 0.0

    def test_uniform_ten_classes(self):
        assert cross_entropy(np.full((4, 10), 0.1), [0, 3, 5, 9]) == pytest.approx(math.log(10), abs=1e-12)

    def test_half_probability(self):
        assert cross_entropy([[0.5, 0.5]], [1]) == pytest.approx(math.log(2), abs=1e-12)

    def test_zero_probability_is_floored(self):
        assert cross_entropy([[1.0, 0.0]], [1]) == pytest.approx(-math.log(1e-12))

    def test_empty_batch(self):
        with pytest.raises(InvalidInputError):
            cross_entropy(np.zeros((0, 10)), [])


class TestGradients:
    def test_linear_zero_at_perfect_fit(self):
        # softmax saturates to an exact one-hot in float64
        W = np.array([[800.0, 0.0], [0.0, 800.0]])
        model = LinearModel({'W': W}, in_features=2, classes=2)
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(gradients(model, X, [0, 1]), np.zeros(4))

    def test_linear_closed_form(self, rng):
        model = LinearModel.initialize(RngStream(4, (PURPOSE_INIT,)), in_features=6, classes=3)
        X = rng.uniform(size=(8, 6))
        y = rng.integers(0, 3, size=8)
        probs = model.predict_proba(X)
        onehot = np.eye(3)[y]
        expected = (probs - onehot).T @ X / 8
        np.testing.assert_allclose(gradients(model, X, y), expected.ravel(), atol=1e-14)

    def test_linear_finite_differences(self, rng):
        model = LinearModel.initialize(RngStream(5, (PURPOSE_INIT,)))
        for _ in range(5):
            X = rng.uniform(size=(8, 784))
            y = rng.integers(0, 10, size=8)
            coords = sample_coords(model.flat().size, rng)
            assert max_relative_error(model, X, y, coords) < 1e-6

    def test_mlp_finite_differences(self, rng):
        model = MlpModel.initialize(RngStream(6, (PURPOSE_INIT,)), in_features=12, hidden=10, classes=4)
        model = model.with_params({**model.params, 'b1': rng.normal(scale=0.1, size=10)})
        checked = 0
        while checked < 5:
            X = rng.uniform(size=(8, 12))
            y = rng.integers(0, 4, size=8)
            hidden = X @ model.params['W1'].T + model.params['b1']
            if np.min(np.abs(hidden)) < 1e-3:
                continue  # too close to a ReLU kink
            assert max_relative_error(model, X, y, range(model.flat().size)) < 1e-4
            checked += 1

    def test_cnn_finite_differences(self, rng):
        model = small_cnn()
        params = dict(model.params)
        params['ln_gamma'] = rng.uniform(0.5, 1.5, size=2)
        params['ln_beta'] = rng.normal(scale=0.2, size=2)
        params['fc_b'] = rng.normal(scale=0.1, size=3)
        model = model.with_params(params)
        for _ in range(5):
            X = rng.uniform(size=(8, 8, 8))
            y = rng.integers(0, 3, size=8)
            assert max_relative_error(model, X, y, range(model.flat().size)) < 1e-4


class TestFlatParams:
    @pytest.mark.parametrize('kind', ['linear', 'mlp', 'cnn'])
    def test_round_trip(self, kind):
        model = initialize_model(kind, RngStream(8, (PURPOSE_INIT,)))
        flat = model.flat()
        restored = flat.to_params()
        assert list(restored) == list(model.params)
        for name in model.params:
            np.testing.assert_array_equal(restored[name], model.params[name])
        np.testing.assert_array_equal(FlatParams.from_params(restored).vector, flat.vector)

    def test_slices_cover_vector(self):
        flat = MlpModel.initialize(RngStream(0), in_features=5, hidden=3, classes=2).flat()
        slices = flat.slices()
        assert list(slices) == ['W1', 'b1', 'W2', 'b2']
        assert slices['b2'].stop == flat.size == 15 + 3 + 6 + 2

    def test_wrong_length(self):
        flat = LinearModel.zeros(in_features=2, classes=2).flat()
        with pytest.raises(InvalidInputError):
            flat.with_vector(np.zeros(5))


class TestAdam:
    def test_zero_gradient(self):
        params = np.array([1.0, -2.0, 3.0])
        state = AdamState.zeros(3)
        new_params, new_state = adam_step(params, np.zeros(3), state)
        np.testing.assert_array_equal(new_params, params)
        assert new_state.t == 1

    def test_first_step_is_signed_lr(self):
        g = np.array([0.5, -2.0, 30.0, -0.1])
        state = AdamState.zeros(4, lr=1e-3)
        new_params, _ = adam_step(np.zeros(4), g, state)
        np.testing.assert_allclose(new_params, -1e-3 * np.sign(g), atol=1e-3 * 1e-6)

    def test_deterministic(self, rng):
        params = rng.normal(size=6)
        grads = rng.normal(size=6)
        state = AdamState.zeros(6)
        a = adam_step(params, grads, state)
        b = adam_step(params, grads, state)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1].m, b[1].m)
        np.testing.assert_array_equal(a[1].v, b[1].v)

    def test_state_not_mutated(self):
        state = AdamState.zeros(2)
        adam_step(np.zeros(2), np.ones(2), state)
        assert state.t == 0
        np.testing.assert_array_equal(state.m, np.zeros(2))

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            adam_step(np.zeros(3), np.zeros(2), AdamState.zeros(3))


class TestCheckpoint:
    @pytest.mark.parametrize('kind', ['linear', 'mlp', 'cnn'])
    def test_round_trip(self, kind, tmp_path):
        model = initialize_model(kind, RngStream(11, (PURPOSE_INIT,)))
        path = str(tmp_path / 'model.npz')
        save_checkpoint(model, path)
        restored = load_checkpoint(path, model.architecture())
        assert restored.architecture() == model.architecture()
        np.testing.assert_array_equal(restored.flat().vector, model.flat().vector)

    def test_architecture_mismatch(self, tmp_path):
        path = str(tmp_path / 'model.npz')
        save_checkpoint(LinearModel.zeros(), path)
        expected = MlpModel.initialize(RngStream(0)).architecture()
        with pytest.raises(ConfigurationError):
            load_checkpoint(path, expected)

    def test_build_model_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            build_model({'kind': 'vit'}, {})

    def test_initialize_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            initialize_model('convnext', RngStream(0))

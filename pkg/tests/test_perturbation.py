"""Noise injection, Monte-Carlo passes and prediction log files."""
import math
import os

import numpy as np
import pytest
from scipy.stats import norm

from core.mathops import gaussian_matrix
from core.rng import PURPOSE_INIT, PURPOSE_PERTURB, RngStream
from dataset.loader import LabeledDataset
from models.cnn import TinyCnn
from models.linear import LinearModel
from models.training import predict_proba
from perturbation.inject import PerturbMode, perturb_input, perturb_params
from perturbation.log_io import read_prediction_log, sidecar_path, write_prediction_log
from perturbation.sampler import LogMetadata, PredictionLog, run_perturbed_pass
from utils.errors import InvalidInputError


def small_dataset(rng, size=12):
    return LabeledDataset(rng.uniform(size=(size, 3, 3)), np.arange(size) % 4, 4)


def small_model():
    return LinearModel.initialize(RngStream(0, (PURPOSE_INIT,)), in_features=9, classes=4)


class TestPerturbParams:
    def test_zero_sigma_is_identity(self):
        model = small_model()
        perturbed = perturb_params(model, 0.0, RngStream(1))
        np.testing.assert_array_equal(perturbed.flat().vector, model.flat().vector)
        assert perturbed is not model

    def test_noise_statistics(self):
        model = LinearModel.zeros(in_features=10000, classes=10)
        offsets = perturb_params(model, 0.5, RngStream(7, (PURPOSE_PERTURB,))).flat().vector
        assert offsets.size == 10 ** 5
        assert offsets.std() == pytest.approx(0.5, rel=0.02)
        assert abs(offsets.mean()) < 4 * 0.5 / math.sqrt(10 ** 5)

    def test_offsets_are_gaussian_matrix_draws(self):
        model = small_model()
        stream = RngStream(11, (PURPOSE_PERTURB, 0))
        offsets = perturb_params(model, 0.3, stream).flat().vector - model.flat().vector
        expected = 0.3 * gaussian_matrix(1, model.flat().size, stream)[0]
        np.testing.assert_allclose(offsets, expected, atol=1e-12)

    def test_same_stream_same_model(self):
        model = small_model()
        a = perturb_params(model, 0.3, RngStream(2, (PURPOSE_PERTURB, 0)))
        b = perturb_params(model, 0.3, RngStream(2, (PURPOSE_PERTURB, 0)))
        np.testing.assert_array_equal(a.flat().vector, b.flat().vector)

    def test_original_untouched(self):
        model = small_model()
        before = model.flat().vector.copy()
        perturb_params(model, 1.0, RngStream(3))
        np.testing.assert_array_equal(model.flat().vector, before)

    def test_negative_sigma(self):
        with pytest.raises(InvalidInputError):
            perturb_params(small_model(), -0.1, RngStream(0))

    def test_group_restriction(self):
        model = TinyCnn.initialize(RngStream(0), image_size=8, filters=2, kernel=3, pool=2, classes=3)
        perturbed = perturb_params(model, 1.0, RngStream(4), groups=['fc_W'])
        for name in model.params:
            changed = np.any(perturbed.params[name] != model.params[name])
            assert changed == (name == 'fc_W')

    def test_unknown_group(self):
        with pytest.raises(InvalidInputError):
            perturb_params(small_model(), 1.0, RngStream(0), groups=['conv'])


class TestPerturbInput:
    def test_zero_sigma_is_identity(self, rng):
        x = rng.uniform(size=(5, 5))
        np.testing.assert_array_equal(perturb_input(x, 0.0, RngStream(0)), x)

    def test_stays_in_unit_interval(self, rng):
        x = rng.uniform(size=(50, 28, 28))
        for sigma in (0.1, 1.0, 10.0):
            out = perturb_input(x, sigma, RngStream(1, (int(sigma * 10),)))
            assert out.shape == x.shape
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_saturation_frequency(self):
        out = perturb_input(np.full(10 ** 5, 0.5), 10.0, RngStream(9, (PURPOSE_PERTURB,)))
        saturated = np.mean((out == 0.0) | (out == 1.0))
        p = 2 * norm.cdf(-0.05)
        assert abs(saturated - p) < 3 * math.sqrt(p * (1 - p) / 10 ** 5)

    def test_negative_sigma(self):
        with pytest.raises(InvalidInputError):
            perturb_input(np.zeros(3), -1.0, RngStream(0))

    def test_noise_is_gaussian_matrix_draws(self, rng):
        x = rng.uniform(size=(3, 4, 4))
        stream = RngStream(12, (PURPOSE_PERTURB, 1))
        expected = np.clip(x + 0.2 * gaussian_matrix(1, x.size, stream).reshape(x.shape), 0.0, 1.0)
        np.testing.assert_array_equal(perturb_input(x, 0.2, stream), expected)

    def test_empty_batch(self):
        assert perturb_input(np.zeros((0, 4, 4)), 0.5, RngStream(0)).shape == (0, 4, 4)


class TestPerturbedPass:
    def test_zero_sigma_repeats_unperturbed_prediction(self, rng):
        model, ds = small_model(), small_dataset(rng)
        expected = np.argmax(predict_proba(model, ds.images), axis=1)
        for mode in PerturbMode:
            log = run_perturbed_pass(model, ds, 0.0, mode, 5, RngStream(0, (PURPOSE_PERTURB,)))
            np.testing.assert_array_equal(log.preds, np.repeat(expected[:, None], 5, axis=1))

    @pytest.mark.parametrize('mode', ['weight', 'input'])
    def test_log_shape(self, mode, rng):
        log = run_perturbed_pass(small_model(), small_dataset(rng), 0.5, mode, 7, RngStream(1))
        assert log.preds.shape == (12, 7)
        assert log.true_probs.shape == (12, 7)
        assert log.meta.mode is PerturbMode(mode)
        assert log.true_probs.min() >= 0.0 and log.true_probs.max() <= 1.0

    def test_weight_draws_shared_across_samples(self, rng):
        image = rng.uniform(size=(1, 3, 3))
        ds = LabeledDataset(np.repeat(image, 2, axis=0), np.array([1, 1]), 4)
        log = run_perturbed_pass(small_model(), ds, 2.0, PerturbMode.WEIGHT, 6, RngStream(2))
        assert log.meta.noise_draws == 6
        np.testing.assert_array_equal(log.preds[0], log.preds[1])
        np.testing.assert_allclose(log.true_probs[0], log.true_probs[1], atol=1e-12)

    def test_independent_weight_draws(self, rng):
        image = rng.uniform(size=(1, 3, 3))
        ds = LabeledDataset(np.repeat(image, 2, axis=0), np.array([1, 1]), 4)
        log = run_perturbed_pass(small_model(), ds, 2.0, PerturbMode.WEIGHT, 6, RngStream(2),
                                 independent_draws=True)
        assert log.meta.noise_draws == 12
        assert log.meta.independent_draws
        assert np.any(log.true_probs[0] != log.true_probs[1])

    def test_input_noise_fresh_per_sample(self, rng):
        image = rng.uniform(size=(1, 3, 3))
        ds = LabeledDataset(np.repeat(image, 2, axis=0), np.array([1, 1]), 4)
        log = run_perturbed_pass(small_model(), ds, 0.3, PerturbMode.INPUT, 5, RngStream(3))
        assert log.meta.noise_draws == 2 * 5
        assert np.all(log.true_probs[0] != log.true_probs[1])

    @pytest.mark.parametrize('mode', ['weight', 'input'])
    def test_deterministic(self, mode, rng):
        model, ds = small_model(), small_dataset(rng)
        a = run_perturbed_pass(model, ds, 1.0, mode, 4, RngStream(5, (PURPOSE_PERTURB, 1)))
        b = run_perturbed_pass(model, ds, 1.0, mode, 4, RngStream(5, (PURPOSE_PERTURB, 1)))
        np.testing.assert_array_equal(a.preds, b.preds)
        np.testing.assert_array_equal(a.true_probs, b.true_probs)

    def test_input_chunks_do_not_change_shape(self, rng):
        log = run_perturbed_pass(small_model(), small_dataset(rng, 25), 0.5, 'input', 3, RngStream(0), chunk=10)
        assert log.preds.shape == (25, 3)

    @pytest.mark.parametrize('dw, sigma', [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)])
    def test_two_class_flip_probability(self, dw, sigma):
        model = LinearModel({'W': np.array([[dw], [0.0]])}, in_features=1, classes=2)
        ds = LabeledDataset(np.ones((1, 1, 1)), np.array([0]), 2)
        n = 10 ** 5
        log = run_perturbed_pass(model, ds, sigma, PerturbMode.WEIGHT, n, RngStream(17, (PURPOSE_PERTURB,)))
        flips = np.mean(log.preds[0] != 0)
        p = norm.cdf(-dw / (sigma * math.sqrt(2)))
        assert abs(flips - p) < 3 * math.sqrt(p * (1 - p) / n)

    def test_invalid_arguments(self, rng):
        with pytest.raises(InvalidInputError):
            run_perturbed_pass(small_model(), small_dataset(rng), 0.1, 'weight', 0, RngStream(0))
        empty = LabeledDataset(np.zeros((0, 3, 3)), np.zeros(0, dtype=np.int64), 4)
        with pytest.raises(InvalidInputError):
            run_perturbed_pass(small_model(), empty, 0.1, 'weight', 3, RngStream(0))


class TestPredictionLogFiles:
    def test_write_and_read(self, tmp_path, rng):
        log = run_perturbed_pass(small_model(), small_dataset(rng), 0.5, 'input', 4, RngStream(8))
        path = str(tmp_path / 'sigma0.5_input.csv')
        write_prediction_log(log, path)
        assert os.path.exists(sidecar_path(path))

        restored = read_prediction_log(path)
        np.testing.assert_array_equal(restored.preds, log.preds)
        np.testing.assert_array_equal(restored.true_labels, log.true_labels)
        np.testing.assert_allclose(restored.true_probs, log.true_probs, rtol=0, atol=0)
        assert restored.meta == log.meta

    def test_header(self, tmp_path):
        meta = LogMetadata(sigma=1.0, mode=PerturbMode.WEIGHT, n=2, num_classes=3)
        log = PredictionLog(np.array([0, 2]), np.array([[0, 1], [2, 2]]), np.array([[0.9, 0.2], [0.5, 0.6]]), meta)
        path = str(tmp_path / 'log.csv')
        write_prediction_log(log, path)
        with open(path) as f:
            assert f.readline().strip() == 'id,true_label,pred_0,pred_1,prob_0,prob_1'

    def test_external_log_without_sidecar(self, tmp_path):
        path = tmp_path / 'external.csv'
        path.write_text('true_label,pred_0,pred_1,prob_0,prob_1\n1,1,0,0.8,0.3\n0,0,0,0.9,0.95\n')
        log = read_prediction_log(str(path), sigma=0.1, mode='weight', num_classes=10)
        assert log.n == 2
        assert log.meta.sigma == 0.1
        np.testing.assert_array_equal(log.correct, [[True, False], [True, True]])

    def test_missing_metadata(self, tmp_path):
        path = tmp_path / 'external.csv'
        path.write_text('true_label,pred_0,prob_0\n1,1,0.8\n')
        with pytest.raises(InvalidInputError):
            read_prediction_log(str(path))

    def test_invalid_log_rejected(self):
        meta = LogMetadata(sigma=1.0, mode=PerturbMode.WEIGHT, n=2, num_classes=3)
        with pytest.raises(InvalidInputError):
            PredictionLog(np.array([0]), np.array([[0, 5]]), np.array([[0.5, 0.5]]), meta)

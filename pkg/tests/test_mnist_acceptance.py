"""Trend-level checks of the naive multinomial model on the real MNIST files.

Skipped unless the four IDX files (plain or .gz) are present under UQ_DATA_DIR.
"""
import os

import pytest

from metrics.eac import binned_conditional_accuracy, regression_line
from metrics.uq import sample_stats
from perturbation.log_io import read_prediction_log
from pipeline.experiment import run_experiment
from storage.artifacts import ArtifactStore
from utils.config import MNIST_FILES, build_experiment_config, config


def _have_mnist() -> bool:
    return all(
        os.path.exists(os.path.join(config.DATA_DIR, name)) or
        os.path.exists(os.path.join(config.DATA_DIR, name + '.gz'))
        for name in MNIST_FILES.values()
    )


pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not _have_mnist(), reason=f"MNIST IDX files not found under {config.DATA_DIR}"),
]


@pytest.fixture(scope='module')
def linear_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp('mnist_linear'))
    cfg = build_experiment_config({
        'data_dir': config.DATA_DIR,
        'model': 'linear',
        'epochs': 10,
        'batch_size': 64,
        'iters': 10,
        'sigmas': [0.1, 0.5, 1.0, 10.0],
        'output_dir': out,
        'master_seed': 0,
    })
    rows, alpha = run_experiment(cfg)
    return cfg, {(row.sigma, row.mode): row for row in rows}, alpha


def test_training_floor(linear_run):
    _, _, alpha = linear_run
    assert alpha >= 0.88


@pytest.mark.parametrize('sigma, mode, lo, hi', [
    (0.1, 'weight', 0.00, 0.06),
    (0.1, 'input', 0.00, 0.06),
    (10.0, 'weight', 0.70, 0.87),
    (10.0, 'input', 0.72, 0.88),
])
def test_pi_bands(linear_run, sigma, mode, lo, hi):
    _, rows, _ = linear_run
    assert lo <= rows[(sigma, mode)].pi <= hi


def test_weight_pi_grows_with_sigma(linear_run):
    _, rows, _ = linear_run
    pis = [rows[(sigma, 'weight')].pi for sigma in (0.1, 0.5, 1.0, 10.0)]
    for previous, current in zip(pis, pis[1:]):
        assert current >= previous - 0.02


def test_psi_band(linear_run):
    _, rows, _ = linear_run
    row = rows[(0.1, 'weight')]
    assert 0.90 <= row.psi[0.1] <= 1.00
    assert abs((row.psi[2.0] - row.psi[0.1]) + row.corr * 1.9) < 1e-12


def test_large_weight_noise_is_chance_level(linear_run):
    _, rows, _ = linear_run
    assert 0.05 <= rows[(10.0, 'weight')].alpha_sigma <= 0.15


def test_unperturbed_beats_heavy_noise(linear_run):
    _, rows, alpha = linear_run
    assert alpha >= rows[(10.0, 'weight')].alpha_sigma - 0.01


@pytest.mark.parametrize('mode', ['weight', 'input'])
def test_negative_eac_slope(linear_run, mode):
    cfg, _, _ = linear_run
    log = read_prediction_log(ArtifactStore(cfg.output_dir).log_path(0.1, mode))
    bins = binned_conditional_accuracy(sample_stats(log), log.meta.num_classes, cfg.num_bins, cfg.min_count)
    line = regression_line(bins)
    assert line is not None
    assert line.slope < 0

"""Experiment orchestration: train, perturb, metrics and the full run."""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np

from charts.eac_plots import emit_eac_bars, emit_eac_scatter
from core.rng import PURPOSE_INIT, PURPOSE_PERTURB, PURPOSE_SHUFFLE, PURPOSE_SUBSET, RngStream
from dataset.loader import MNIST_CLASSES, LabeledDataset, load_idx_pair, seeded_subset
from metrics.eac import binned_conditional_accuracy, per_class_eac, regression_line
from metrics.grid import MetricRow, metric_grid
from metrics.uq import sample_stats
from models.base import Model
from models.checkpoint import load_checkpoint, save_checkpoint
from models.factory import initialize_model
from models.training import accuracy, train
from perturbation.inject import PerturbMode
from perturbation.log_io import read_prediction_log, sidecar_path, write_prediction_log
from perturbation.sampler import PredictionLog, model_fingerprint, run_perturbed_pass
from storage.artifacts import BASELINE_FILE, CHECKPOINT_FILE, ArtifactStore
from utils.config import ExperimentConfig
from utils.errors import ConfigurationError
from utils.logger import experiment_logger

GridKey = Tuple[float, str]

# subset stream ids under PURPOSE_SUBSET
SUBSET_EVAL = 0
SUBSET_TRAIN = 1


class ExperimentRunner:
    """Runs the pipeline stages for one resolved configuration."""

    def __init__(self, cfg: ExperimentConfig, force: bool = False, alpha: Optional[float] = None):
        """Initialize runner; alpha overrides the baseline file in the metrics stage."""
        self.cfg = cfg
        self.force = force
        self.alpha_override = alpha
        self.store = ArtifactStore(cfg.output_dir)
        self.root_rng = RngStream(cfg.master_seed)

    # -- inputs ------------------------------------------------------------

    def grid(self) -> List[Tuple[int, float, PerturbMode]]:
        """(sigma index, sigma, mode) in sigma-major order."""
        return [
            (si, float(sigma), PerturbMode(mode))
            for si, sigma in enumerate(self.cfg.sigmas)
            for mode in self.cfg.modes
        ]

    def load_eval_set(self) -> LabeledDataset:
        dataset = load_idx_pair(self.cfg.data_path('test_images'), self.cfg.data_path('test_labels'))
        subset = self.cfg.effective_eval_subset()
        return seeded_subset(dataset, subset, self.root_rng.child(PURPOSE_SUBSET, SUBSET_EVAL))

    def load_train_set(self) -> LabeledDataset:
        dataset = load_idx_pair(self.cfg.data_path('train_images'), self.cfg.data_path('train_labels'))
        return seeded_subset(dataset, self.cfg.train_subset, self.root_rng.child(PURPOSE_SUBSET, SUBSET_TRAIN))

    def architecture_args(self, image_shape: Tuple[int, ...]) -> Dict:
        """Constructor arguments of the configured model for the given image shape."""
        if self.cfg.model == 'cnn':
            if len(image_shape) != 2 or image_shape[0] != image_shape[1]:
                raise ConfigurationError(f"cnn needs square images, got {image_shape}", field='model')
            cnn = self.cfg.cnn
            return {
                'image_size': image_shape[0],
                'filters': cnn.filters,
                'kernel': cnn.kernel,
                'stride': cnn.stride,
                'padding': cnn.padding,
                'pool': cnn.pool,
                'classes': MNIST_CLASSES,
            }

        args = {'in_features': int(np.prod(image_shape)), 'classes': MNIST_CLASSES}
        if self.cfg.model == 'mlp':
            args['hidden'] = self.cfg.hidden_size
        return args

    def expected_architecture(self, image_shape: Tuple[int, ...]) -> Dict:
        return {'kind': self.cfg.model, **self.architecture_args(image_shape)}

    def load_model(self, image_shape: Tuple[int, ...]) -> Model:
        """Model written by the train stage, or the configured checkpoint."""
        path = self.cfg.checkpoint or self.store.require(CHECKPOINT_FILE)
        return load_checkpoint(path, self.expected_architecture(image_shape))

    # -- stages ------------------------------------------------------------

    def train_stage(self, eval_set: Optional[LabeledDataset] = None) -> Tuple[Model, float]:
        """Train (or load) the model and record its unperturbed accuracy."""
        cfg = self.cfg
        experiment_logger.log_stage_start('train', cfg.output_dir)
        self.store.prepare(['train'], self.force)
        self.store.write_config(cfg.resolved())

        eval_set = eval_set if eval_set is not None else self.load_eval_set()

        if cfg.checkpoint:
            model = load_checkpoint(cfg.checkpoint, self.expected_architecture(eval_set.image_shape))
            history = []
            experiment_logger.logger.info(f"Loaded {model.kind} checkpoint from {cfg.checkpoint}")
        else:
            train_set = self.load_train_set()
            model = initialize_model(
                cfg.model, self.root_rng.child(PURPOSE_INIT), **self.architecture_args(train_set.image_shape)
            )
            result = train(
                model, train_set, cfg.epochs, cfg.batch_size, self.root_rng.child(PURPOSE_SHUFFLE),
                lr=cfg.adam.lr, beta1=cfg.adam.beta1, beta2=cfg.adam.beta2, eps=cfg.adam.eps,
            )
            model, history = result.model, result.history

        alpha = accuracy(model, eval_set)
        save_checkpoint(model, self.store.path(CHECKPOINT_FILE))
        self.store.write_training_history(history)
        self.store.write_baseline(alpha, len(eval_set), model_fingerprint(model))

        experiment_logger.log_stage_complete('train', f"alpha={alpha:.4f} on {len(eval_set)} samples")
        return model, alpha

    def _perturb_point(self, model: Model, eval_set: LabeledDataset, si: int, sigma: float,
                       mode: PerturbMode, model_id: str) -> PredictionLog:
        rng = self.root_rng.child(PURPOSE_PERTURB, si, mode.code)
        log = run_perturbed_pass(
            model, eval_set, sigma, mode, self.cfg.iters, rng,
            independent_draws=self.cfg.independent_draws, model_id=model_id,
        )
        experiment_logger.logger.info(
            f"Perturbed pass sigma={sigma:g} mode={mode.value}: {len(log)} samples x {log.n} draws "
            f"({log.meta.noise_draws} noise draws)"
        )
        return log

    def perturb_stage(self, model: Optional[Model] = None,
                      eval_set: Optional[LabeledDataset] = None) -> Dict[GridKey, PredictionLog]:
        """One PredictionLog per grid point, computed in parallel and written in grid order."""
        cfg = self.cfg
        experiment_logger.log_stage_start('perturb', cfg.output_dir)
        self.store.prepare(['perturb'], self.force)
        self.store.write_config(cfg.resolved())

        eval_set = eval_set if eval_set is not None else self.load_eval_set()
        model = model if model is not None else self.load_model(eval_set.image_shape)
        model_id = model_fingerprint(model)

        points = self.grid()
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [
                pool.submit(self._perturb_point, model, eval_set, si, sigma, mode, model_id)
                for si, sigma, mode in points
            ]
            results = [future.result() for future in futures]

        logs = {}
        for (_, sigma, mode), log in zip(points, results):
            write_prediction_log(log, self.store.log_path(sigma, mode.value))
            logs[(sigma, mode.value)] = log

        experiment_logger.log_stage_complete('perturb', f"{len(logs)} prediction logs")
        return logs

    def read_logs(self) -> Dict[GridKey, PredictionLog]:
        """Prediction logs of the grid; logs without a sidecar are taken as MNIST-sized."""
        logs = {}
        for _, sigma, mode in self.grid():
            path = self.store.log_path(sigma, mode.value)
            self.store.require(os.path.relpath(path, self.store.root))
            num_classes = None if os.path.exists(sidecar_path(path)) else MNIST_CLASSES
            logs[(sigma, mode.value)] = read_prediction_log(path, sigma=sigma, mode=mode.value,
                                                            num_classes=num_classes)
        return logs

    def resolve_alpha(self) -> float:
        if self.alpha_override is not None:
            return float(self.alpha_override)
        if not os.path.exists(self.store.path(BASELINE_FILE)):
            raise ConfigurationError(
                f"no {BASELINE_FILE} in {self.store.root}; give the unperturbed accuracy", field='alpha'
            )
        return float(self.store.read_baseline()['alpha'])

    def metrics_stage(self, logs: Optional[Dict[GridKey, PredictionLog]] = None,
                      alpha: Optional[float] = None) -> List[MetricRow]:
        """metrics.csv plus per-point samples, bins, per-class table and both charts."""
        cfg = self.cfg
        experiment_logger.log_stage_start('metrics', cfg.output_dir)
        self.store.prepare(['metrics'], self.force)
        self.store.write_config(cfg.resolved())

        logs = logs if logs is not None else self.read_logs()
        alpha = alpha if alpha is not None else self.resolve_alpha()

        rows = metric_grid(logs, cfg.lambdas, alpha, cfg.sigmas, cfg.modes, cfg.corr_pooling)
        self.store.write_metrics(rows)

        for row in rows:
            log = logs[(row.sigma, row.mode)]
            C = log.meta.num_classes
            stats = sample_stats(log)
            bins = binned_conditional_accuracy(stats, C, cfg.num_bins, cfg.min_count)
            regression = regression_line(bins)
            class_rows = per_class_eac(stats, C)

            self.store.write_samples(stats, row.sigma, row.mode)
            self.store.write_bins(bins, row.sigma, row.mode)
            self.store.write_class_eac(class_rows, row.sigma, row.mode)

            point_dir = self.store.point_dir(row.sigma, row.mode)
            label = f"sigma={row.sigma:g}, {row.mode} perturbation"
            emit_eac_scatter(stats, bins, regression, os.path.join(point_dir, 'eac_scatter.svg'), C,
                             title=f"EAC graph ({label})")
            emit_eac_bars(class_rows, os.path.join(point_dir, 'eac_bars.svg'),
                          title=f"Per-class EAC ({label})")

            if regression is None:
                experiment_logger.logger.info(
                    f"sigma={row.sigma:g} {row.mode}: fewer than 2 populated entropy bins, no regression line"
                )
            experiment_logger.log_metric_row(row)

        experiment_logger.log_stage_complete('metrics', f"{len(rows)} metric rows")
        return rows

    def run(self) -> List[MetricRow]:
        """All stages in sequence, passing results in memory."""
        self.store.prepare(['train', 'perturb', 'metrics'], self.force)
        eval_set = self.load_eval_set()
        model, alpha = self.train_stage(eval_set)
        logs = self.perturb_stage(model, eval_set)
        return self.metrics_stage(logs, alpha)


def run_experiment(cfg: ExperimentConfig, force: bool = False) -> Tuple[List[MetricRow], float]:
    """Run the full experiment; returns the metric rows and the unperturbed accuracy."""
    runner = ExperimentRunner(cfg, force=force)
    rows = runner.run()
    alpha = rows[0].alpha if rows else runner.resolve_alpha()
    return rows, alpha

"""Monte-Carlo sampling of argmax predictions under perturbation."""
import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.mathops import argmax
from core.rng import RngStream
from dataset.loader import LabeledDataset
from models.base import Model
from models.training import EVAL_CHUNK, predict_proba
from perturbation.inject import PerturbMode, perturb_input, perturb_params
from utils.errors import InvalidInputError


@dataclass(frozen=True)
class LogMetadata:
    sigma: float
    mode: PerturbMode
    n: int
    num_classes: int
    model_id: str = ''
    seed: int = 0
    noise_draws: int = 0
    independent_draws: bool = False

    def to_dict(self) -> dict:
        return {
            'sigma': self.sigma,
            'mode': self.mode.value,
            'n': self.n,
            'num_classes': self.num_classes,
            'model_id': self.model_id,
            'seed': self.seed,
            'noise_draws': self.noise_draws,
            'independent_draws': self.independent_draws,
        }

    @classmethod
    def from_dict(cls, values: dict) -> 'LogMetadata':
        values = dict(values)
        values['mode'] = PerturbMode(values['mode'])
        return cls(**values)


@dataclass(frozen=True)
class PredictionLog:
    """Per sample: true label, n perturbed argmax predictions and n true-class probabilities."""

    true_labels: np.ndarray
    preds: np.ndarray
    true_probs: np.ndarray
    meta: LogMetadata

    def __post_init__(self):
        N = len(self.true_labels)
        expected = (N, self.meta.n)
        if self.preds.shape != expected or self.true_probs.shape != expected:
            raise InvalidInputError(
                f"log arrays must be {expected}, got preds {self.preds.shape}, probs {self.true_probs.shape}"
            )
        C = self.meta.num_classes
        if N and (self.preds.min() < 0 or self.preds.max() >= C):
            raise InvalidInputError(f"predictions outside [0, {C})")
        if N and (self.true_labels.min() < 0 or self.true_labels.max() >= C):
            raise InvalidInputError(f"labels outside [0, {C})")
        if N and (self.true_probs.min() < 0.0 or self.true_probs.max() > 1.0):
            raise InvalidInputError("true-class probabilities outside [0, 1]")

    def __len__(self) -> int:
        return len(self.true_labels)

    @property
    def n(self) -> int:
        return self.meta.n

    @property
    def correct(self) -> np.ndarray:
        """(N, n) boolean per-draw correctness."""
        return self.preds == self.true_labels[:, None]


def model_fingerprint(model: Model) -> str:
    digest = hashlib.sha256(model.flat().vector.tobytes()).hexdigest()[:12]
    return f"{model.kind}-{digest}"


def run_perturbed_pass(model: Model, dataset: LabeledDataset, sigma: float, mode: PerturbMode,
                       n: int, rng: RngStream, independent_draws: bool = False,
                       model_id: Optional[str] = None, chunk: int = EVAL_CHUNK) -> PredictionLog:
    """Sample n perturbed predictions for every sample of the dataset.

    Weight mode shares the n perturbed models across all samples unless
    independent_draws is set; input mode draws fresh noise per (sample, draw)
    with streams keyed by (draw, chunk).
    """
    mode = PerturbMode(mode)
    if n < 1:
        raise InvalidInputError(f"draw count must be >= 1, got {n}")
    if len(dataset) == 0:
        raise InvalidInputError("perturbed pass over an empty dataset")

    N = len(dataset)
    labels = dataset.labels
    preds = np.empty((N, n), dtype=np.int64)
    true_probs = np.empty((N, n), dtype=np.float64)
    rows = np.arange(N)

    if mode is PerturbMode.WEIGHT and not independent_draws:
        for i in range(n):
            perturbed = perturb_params(model, sigma, rng.child(i))
            probs = predict_proba(perturbed, dataset.images, chunk)
            preds[:, i] = argmax(probs, axis=1)
            true_probs[:, i] = probs[rows, labels]
        noise_draws = n

    elif mode is PerturbMode.WEIGHT:
        for j in range(N):
            image = dataset.images[j:j + 1]
            for i in range(n):
                probs = perturb_params(model, sigma, rng.child(i, j)).predict_proba(image)[0]
                preds[j, i] = argmax(probs)
                true_probs[j, i] = probs[labels[j]]
        noise_draws = N * n

    else:
        for c, start in enumerate(range(0, N, chunk)):
            block = dataset.images[start:start + chunk]
            block_rows = np.arange(len(block))
            block_labels = labels[start:start + chunk]
            for i in range(n):
                probs = model.predict_proba(perturb_input(block, sigma, rng.child(i, c)))
                preds[start:start + len(block), i] = argmax(probs, axis=1)
                true_probs[start:start + len(block), i] = probs[block_rows, block_labels]
        noise_draws = N * n

    meta = LogMetadata(
        sigma=float(sigma),
        mode=mode,
        n=n,
        num_classes=model.num_classes,
        model_id=model_id or model_fingerprint(model),
        seed=rng.master_seed,
        noise_draws=noise_draws,
        independent_draws=bool(independent_draws and mode is PerturbMode.WEIGHT),
    )
    return PredictionLog(true_labels=labels.copy(), preds=preds, true_probs=np.clip(true_probs, 0.0, 1.0), meta=meta)

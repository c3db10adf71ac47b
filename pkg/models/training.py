"""Loss, gradients, training loop and accuracy."""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from core.mathops import argmax
from core.rng import RngStream
from dataset.loader import LabeledDataset
from models.base import PROB_FLOOR, Model
from models.optim import AdamState, adam_step
from utils.errors import InvalidInputError
from utils.logger import experiment_logger

# Evaluation batch size; perturbation passes use the same chunking
EVAL_CHUNK = 1000


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainResult:
    model: Model
    history: List[EpochRecord] = field(default_factory=list)
    optimizer: Optional[AdamState] = None


def forward(model: Model, x) -> np.ndarray:
    """Probability vector for a single image."""
    x = np.asarray(x, dtype=np.float64)
    return model.predict_proba(x[None, ...])[0]


def predict_proba(model: Model, images: np.ndarray, chunk: int = EVAL_CHUNK) -> np.ndarray:
    """(N, C) probabilities evaluated in fixed-size chunks."""
    if len(images) == 0:
        return np.zeros((0, model.num_classes))
    parts = [model.predict_proba(images[start:start + chunk]) for start in range(0, len(images), chunk)]
    return np.concatenate(parts, axis=0)


def cross_entropy(preds: Sequence, labels: Sequence[int]) -> float:
    """-(1/N) sum ln p_i[y_i], probabilities floored at 1e-12."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.ndim != 2 or len(preds) == 0:
        raise InvalidInputError("cross_entropy needs a non-empty batch of probability vectors")
    if len(preds) != len(labels):
        raise InvalidInputError(f"{len(preds)} predictions but {len(labels)} labels")

    true_probs = np.maximum(preds[np.arange(len(labels)), labels], PROB_FLOOR)
    return float(-np.mean(np.log(true_probs)))


def gradients(model: Model, images, labels) -> np.ndarray:
    """Exact gradient of the batch-average cross-entropy, in FlatParams order."""
    _, _, grads = model.loss_and_gradients(images, labels)
    return np.concatenate([np.ravel(grads[name]) for name in model.param_groups()])


def accuracy(model: Model, dataset: LabeledDataset) -> float:
    """Fraction of samples whose argmax prediction equals the label."""
    if len(dataset) == 0:
        raise InvalidInputError("accuracy of an empty dataset")
    probs = predict_proba(model, dataset.images)
    return float(np.mean(argmax(probs, axis=1) == dataset.labels))


def train(model: Model, dataset: LabeledDataset, epochs: int, batch_size: int, rng: RngStream,
          lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> TrainResult:
    """Mini-batch Adam with a seeded per-epoch shuffle."""
    if len(dataset) == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    if epochs < 1:
        raise InvalidInputError(f"epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise InvalidInputError(f"batch_size must be >= 1, got {batch_size}")

    flat = model.flat()
    vector = flat.vector.copy()
    state = AdamState.zeros(flat.size, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    history = []

    for epoch in range(epochs):
        order = rng.child(epoch).permutation(len(dataset))
        loss_sum, correct = 0.0, 0

        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            current = model.with_flat(vector)
            loss, probs, grads = current.loss_and_gradients(dataset.images[idx], dataset.labels[idx])
            grad_vector = np.concatenate([np.ravel(grads[name]) for name in current.param_groups()])

            vector, state = adam_step(vector, grad_vector, state)

            loss_sum += loss * len(idx)
            correct += int(np.sum(argmax(probs, axis=1) == dataset.labels[idx]))

        record = EpochRecord(epoch=epoch + 1, loss=loss_sum / len(dataset), accuracy=correct / len(dataset))
        history.append(record)
        experiment_logger.logger.info(
            f"[{model.kind}] epoch {record.epoch}/{epochs}: loss={record.loss:.4f} accuracy={record.accuracy:.4f}"
        )

    return TrainResult(model=model.with_flat(vector), history=history, optimizer=state)

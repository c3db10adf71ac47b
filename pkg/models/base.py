"""Common model interface and the flat parameter view.

Every model keeps its trainable tensors in an ordered dict. ``FlatParams``
concatenates them in that order (each tensor C-order raveled), which is the
view used by the optimizer, checkpoints and weight perturbation.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from core.mathops import softmax
from utils.errors import InvalidInputError

Layout = Tuple[Tuple[str, Tuple[int, ...]], ...]


@dataclass(frozen=True)
class FlatParams:
    """All trainable scalars of a model plus the layout to rebuild them."""

    vector: np.ndarray
    layout: Layout

    @classmethod
    def from_params(cls, params: Dict[str, np.ndarray]) -> 'FlatParams':
        layout = tuple((name, tuple(arr.shape)) for name, arr in params.items())
        vector = np.concatenate([np.ravel(arr) for arr in params.values()]).astype(np.float64)
        return cls(vector=vector, layout=layout)

    @property
    def size(self) -> int:
        return int(self.vector.size)

    def slices(self) -> Dict[str, slice]:
        """Position of every named group inside the vector."""
        out, start = {}, 0
        for name, shape in self.layout:
            count = int(np.prod(shape, dtype=np.int64))
            out[name] = slice(start, start + count)
            start += count
        return out

    def to_params(self) -> Dict[str, np.ndarray]:
        expected = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in self.layout)
        if self.vector.size != expected:
            raise InvalidInputError(f"flat vector has {self.vector.size} entries, layout needs {expected}")
        return {
            name: self.vector[part].reshape(shape).copy()
            for (name, shape), part in zip(self.layout, self.slices().values())
        }

    def with_vector(self, vector: np.ndarray) -> 'FlatParams':
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != self.vector.shape:
            raise InvalidInputError(f"expected {self.vector.shape} parameters, got {vector.shape}")
        return FlatParams(vector=vector, layout=self.layout)


class Model(ABC):
    """A trainable softmax classifier with hand-derived gradients."""

    kind: str = ''

    def __init__(self, params: Dict[str, np.ndarray]):
        expected = self.param_shapes()
        if list(params) != list(expected):
            raise InvalidInputError(f"{self.kind} expects parameters {list(expected)}, got {list(params)}")
        for name, shape in expected.items():
            if tuple(np.shape(params[name])) != shape:
                raise InvalidInputError(
                    f"{self.kind} parameter {name}: expected shape {shape}, found {np.shape(params[name])}"
                )
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in expected}

    # -- architecture ------------------------------------------------------

    @abstractmethod
    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        """Ordered parameter names and shapes."""

    @abstractmethod
    def architecture(self) -> Dict:
        """JSON-ready descriptor; build_model(descriptor, params) restores the model."""

    @property
    @abstractmethod
    def input_shape(self) -> Tuple[int, ...]:
        """Shape of a single input image."""

    @property
    @abstractmethod
    def num_classes(self) -> int:
        ...

    # -- forward / backward ------------------------------------------------

    @abstractmethod
    def _logits(self, X: np.ndarray):
        """Return (logits, cache) for a validated batch."""

    @abstractmethod
    def _backward(self, cache, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
        """Parameter gradients given d loss / d logits."""

    def check_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim >= 2 and tuple(X.shape[1:]) == self.input_shape:
            return X
        # Flat and image views of the same pixels are interchangeable
        if X.ndim >= 2 and int(np.prod(X.shape[1:])) == int(np.prod(self.input_shape)):
            return X.reshape((len(X),) + self.input_shape)
        raise InvalidInputError(
            f"{self.kind} expects inputs of shape (N, {', '.join(map(str, self.input_shape))}), "
            f"found {X.shape}"
        )

    def predict_proba(self, X) -> np.ndarray:
        """(N, C) class probabilities."""
        logits, _ = self._logits(self.check_batch(X))
        return softmax(logits)

    def loss_and_gradients(self, X, labels) -> Tuple[float, np.ndarray, Dict[str, np.ndarray]]:
        """Batch-average cross-entropy, the probabilities and exact gradients."""
        X = self.check_batch(X)
        labels = np.asarray(labels, dtype=np.int64)
        if len(X) == 0 or len(X) != len(labels):
            raise InvalidInputError(f"batch of {len(X)} inputs and {len(labels)} labels")

        logits, cache = self._logits(X)
        probs = softmax(logits)
        n = len(X)

        true_probs = np.maximum(probs[np.arange(n), labels], PROB_FLOOR)
        loss = float(-np.mean(np.log(true_probs)))

        dlogits = probs.copy()
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        return loss, probs, self._backward(cache, dlogits)

    # -- flat view ---------------------------------------------------------

    def flat(self) -> FlatParams:
        return FlatParams.from_params(self.params)

    def with_flat(self, flat) -> 'Model':
        """Same architecture, parameters taken from a FlatParams or raw vector."""
        if not isinstance(flat, FlatParams):
            flat = self.flat().with_vector(flat)
        return self.with_params(flat.to_params())

    @abstractmethod
    def with_params(self, params: Dict[str, np.ndarray]) -> 'Model':
        ...

    def param_groups(self) -> List[str]:
        return list(self.param_shapes())


# Probabilities are floored before the log so saturated softmax stays finite
PROB_FLOOR = 1e-12

"""Naive multinomial regression: y = softmax(W x), no bias."""
from typing import Dict, Tuple

import numpy as np

from core.rng import RngStream
from models.base import Model


class LinearModel(Model):
    """One weight matrix W of shape (classes, pixels)."""

    kind = 'linear'

    def __init__(self, params: Dict[str, np.ndarray], in_features: int = 784, classes: int = 10):
        self._in_features = in_features
        self._classes = classes
        super().__init__(params)

    @classmethod
    def initialize(cls, rng: RngStream, in_features: int = 784, classes: int = 10) -> 'LinearModel':
        W = rng.standard_normal((classes, in_features)) / np.sqrt(in_features)
        return cls({'W': W}, in_features, classes)

    @classmethod
    def zeros(cls, in_features: int = 784, classes: int = 10) -> 'LinearModel':
        return cls({'W': np.zeros((classes, in_features))}, in_features, classes)

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {'W': (self._classes, self._in_features)}

    def architecture(self) -> Dict:
        return {'kind': self.kind, 'in_features': self._in_features, 'classes': self._classes}

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return (self._in_features,)

    @property
    def num_classes(self) -> int:
        return self._classes

    def _logits(self, X: np.ndarray):
        return X @ self.params['W'].T, X

    def _backward(self, cache, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
        # (1/N) sum (p_i - onehot(y_i)) x_i^T; the 1/N is already in dlogits
        return {'W': dlogits.T @ cache}

    def with_params(self, params: Dict[str, np.ndarray]) -> 'LinearModel':
        return LinearModel(params, self._in_features, self._classes)

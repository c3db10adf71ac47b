"""Two-layer perceptron: a = relu(W1 x + b1), y = softmax(W2 a + b2)."""
from typing import Dict, Tuple

import numpy as np

from core.rng import RngStream
from models.base import Model
from models.layers import activation, activation_grad


class MlpModel(Model):
    kind = 'mlp'

    def __init__(self, params: Dict[str, np.ndarray], in_features: int = 784,
                 hidden: int = 128, classes: int = 10):
        self._in_features = in_features
        self._hidden = hidden
        self._classes = classes
        super().__init__(params)

    @classmethod
    def initialize(cls, rng: RngStream, in_features: int = 784, hidden: int = 128,
                   classes: int = 10) -> 'MlpModel':
        params = {
            'W1': rng.child(0).standard_normal((hidden, in_features)) / np.sqrt(in_features),
            'b1': np.zeros(hidden),
            'W2': rng.child(1).standard_normal((classes, hidden)) / np.sqrt(hidden),
            'b2': np.zeros(classes),
        }
        return cls(params, in_features, hidden, classes)

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {
            'W1': (self._hidden, self._in_features),
            'b1': (self._hidden,),
            'W2': (self._classes, self._hidden),
            'b2': (self._classes,),
        }

    def architecture(self) -> Dict:
        return {
            'kind': self.kind,
            'in_features': self._in_features,
            'hidden': self._hidden,
            'classes': self._classes,
        }

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return (self._in_features,)

    @property
    def num_classes(self) -> int:
        return self._classes

    def _logits(self, X: np.ndarray):
        p = self.params
        Z1 = X @ p['W1'].T + p['b1']
        A1 = activation('relu', Z1)
        return A1 @ p['W2'].T + p['b2'], (X, Z1, A1)

    def _backward(self, cache, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
        X, Z1, A1 = cache
        dA1 = dlogits @ self.params['W2']
        dZ1 = dA1 * activation_grad('relu', Z1)
        return {
            'W1': dZ1.T @ X,
            'b1': dZ1.sum(axis=0),
            'W2': dlogits.T @ A1,
            'b2': dlogits.sum(axis=0),
        }

    def with_params(self, params: Dict[str, np.ndarray]) -> 'MlpModel':
        return MlpModel(params, self._in_features, self._hidden, self._classes)

"""Tiny convolutional network.

conv (K filters F x F, stride S, padding P, no bias)
  -> layer norm over all K*O*O activations, gamma/beta per feature map
  -> GELU -> average pool (window = stride = pool) -> flatten -> fc -> softmax
"""
from typing import Dict, Tuple

import numpy as np

from core.rng import RngStream
from models.base import Model
from models.layers import (
    LAYER_NORM_EPS,
    activation,
    activation_grad,
    avg_pool,
    avg_pool_grad,
    conv2d,
    conv_out_dim,
    conv_windows,
    normalize,
)


def cnn_geometry(image_size: int, kernel: int, padding: int, stride: int, pool: int) -> Tuple[int, int]:
    """(conv output size, pooled size); raises ConfigurationError when non-integral."""
    conv_size = conv_out_dim(image_size, kernel, padding, stride)
    return conv_size, conv_out_dim(conv_size, pool, 0, pool)


class TinyCnn(Model):
    kind = 'cnn'

    def __init__(self, params: Dict[str, np.ndarray], image_size: int = 28, filters: int = 8,
                 kernel: int = 5, stride: int = 1, padding: int = 0, pool: int = 2, classes: int = 10):
        self._image_size = image_size
        self._filters = filters
        self._kernel = kernel
        self._stride = stride
        self._padding = padding
        self._pool = pool
        self._classes = classes
        _, self._pooled_size = cnn_geometry(image_size, kernel, padding, stride, pool)
        super().__init__(params)

    @classmethod
    def initialize(cls, rng: RngStream, image_size: int = 28, filters: int = 8, kernel: int = 5,
                   stride: int = 1, padding: int = 0, pool: int = 2, classes: int = 10) -> 'TinyCnn':
        _, pooled = cnn_geometry(image_size, kernel, padding, stride, pool)
        features = filters * pooled * pooled
        params = {
            'kernels': rng.child(0).standard_normal((filters, kernel, kernel)) / kernel,
            'ln_gamma': np.ones(filters),
            'ln_beta': np.zeros(filters),
            'fc_W': rng.child(1).standard_normal((classes, features)) / np.sqrt(features),
            'fc_b': np.zeros(classes),
        }
        return cls(params, image_size, filters, kernel, stride, padding, pool, classes)

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        features = self._filters * self._pooled_size * self._pooled_size
        return {
            'kernels': (self._filters, self._kernel, self._kernel),
            'ln_gamma': (self._filters,),
            'ln_beta': (self._filters,),
            'fc_W': (self._classes, features),
            'fc_b': (self._classes,),
        }

    def architecture(self) -> Dict:
        return {
            'kind': self.kind,
            'image_size': self._image_size,
            'filters': self._filters,
            'kernel': self._kernel,
            'stride': self._stride,
            'padding': self._padding,
            'pool': self._pool,
            'classes': self._classes,
        }

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return (self._image_size, self._image_size)

    @property
    def num_classes(self) -> int:
        return self._classes

    def _logits(self, X: np.ndarray):
        p = self.params
        n = len(X)

        Z = conv2d(X, p['kernels'], self._stride, self._padding)
        Zhat = normalize(Z, LAYER_NORM_EPS, axis=(1, 2, 3))
        Y = p['ln_gamma'][None, :, None, None] * Zhat + p['ln_beta'][None, :, None, None]
        A = activation('gelu', Y)
        features = avg_pool(A, self._pool, self._pool).reshape(n, -1)

        logits = features @ p['fc_W'].T + p['fc_b']
        return logits, (X, Z, Zhat, Y, features)

    def _backward(self, cache, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
        X, Z, Zhat, Y, features = cache
        p = self.params
        n, K, Q = len(dlogits), self._filters, self._pooled_size

        d_fc_W = dlogits.T @ features
        d_fc_b = dlogits.sum(axis=0)

        d_pooled = (dlogits @ p['fc_W']).reshape(n, K, Q, Q)
        dY = avg_pool_grad(d_pooled, self._pool) * activation_grad('gelu', Y)

        d_gamma = (dY * Zhat).sum(axis=(0, 2, 3))
        d_beta = dY.sum(axis=(0, 2, 3))

        std = np.sqrt(Z.var(axis=(1, 2, 3), keepdims=True) + LAYER_NORM_EPS)
        dZhat = dY * p['ln_gamma'][None, :, None, None]
        dZ = (
            dZhat
            - dZhat.mean(axis=(1, 2, 3), keepdims=True)
            - Zhat * (dZhat * Zhat).mean(axis=(1, 2, 3), keepdims=True)
        ) / std

        # (n, O, O, F, F) windows against (n, K, O, O) upstream gradient
        windows = conv_windows(X, self._kernel, self._stride, self._padding)
        d_kernels = np.tensordot(dZ, windows, axes=([0, 2, 3], [0, 1, 2]))

        return {
            'kernels': d_kernels,
            'ln_gamma': d_gamma,
            'ln_beta': d_beta,
            'fc_W': d_fc_W,
            'fc_b': d_fc_b,
        }

    def with_params(self, params: Dict[str, np.ndarray]) -> 'TinyCnn':
        return TinyCnn(params, self._image_size, self._filters, self._kernel, self._stride,
                       self._padding, self._pool, self._classes)

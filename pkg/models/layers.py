"""Building blocks shared by the models: convolution geometry, pooling,
layer normalization and activations, each with the derivative the
hand-written backward passes need."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit, ndtr

from utils.errors import ConfigurationError, InvalidInputError

LAYER_NORM_EPS = 1e-5
ACTIVATIONS = ('relu', 'sigmoid', 'gelu')


def conv_out_dim(I: int, F: int, P: int, S: int) -> int:
    """Output size (I - F + 2P) / S + 1; non-integral geometry is rejected."""
    if I < 1 or F < 1 or S < 1 or P < 0:
        raise ConfigurationError(f"invalid geometry I={I}, F={F}, P={P}, S={S}")
    if F > I + 2 * P:
        raise ConfigurationError(f"kernel {F} larger than padded input {I + 2 * P}")

    span = I - F + 2 * P
    if span % S:
        raise ConfigurationError(
            f"non-integral output size ({I} - {F} + 2*{P})/{S} + 1 = {span / S + 1:g}"
        )
    return span // S + 1


def _windows(image: np.ndarray, size: int, stride: int) -> np.ndarray:
    """(..., O, O, size, size) strided windows over the last two axes."""
    return sliding_window_view(image, (size, size), axis=(-2, -1))[..., ::stride, ::stride, :, :]


def conv_windows(images: np.ndarray, size: int, stride: int = 1, padding: int = 0) -> np.ndarray:
    """(..., O, O, size, size) windows of the zero-padded last two axes."""
    pad = [(0, 0)] * (images.ndim - 2) + [(padding, padding)] * 2
    return _windows(np.pad(images, pad), size, stride)


def conv2d(image, kernels, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Valid cross-correlation with (K, F, F) kernels.

    A square (H, W) image gives (K, O, O); a batch (N, H, W) gives (N, K, O, O).
    """
    image = np.asarray(image, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)

    if image.ndim not in (2, 3) or image.shape[-1] != image.shape[-2]:
        raise InvalidInputError(f"expected square (H, W) or (N, H, W) images, got shape {image.shape}")
    if kernels.ndim != 3 or kernels.shape[1] != kernels.shape[2]:
        raise InvalidInputError(f"expected (K, F, F) kernels, got shape {kernels.shape}")

    F = kernels.shape[1]
    try:
        conv_out_dim(image.shape[-1], F, padding, stride)
    except ConfigurationError as e:
        raise InvalidInputError(str(e)) from e

    windows = conv_windows(image, F, stride, padding)
    out = np.tensordot(windows, kernels, axes=([-2, -1], [1, 2]))
    return np.moveaxis(out, -1, -3)


def avg_pool(feature_map, window: int, stride: int) -> np.ndarray:
    """Mean of each window over the last two axes."""
    feature_map = np.asarray(feature_map, dtype=np.float64)
    if feature_map.ndim < 2 or feature_map.shape[-1] != feature_map.shape[-2]:
        raise InvalidInputError(f"expected square maps, got shape {feature_map.shape}")

    try:
        conv_out_dim(feature_map.shape[-1], window, 0, stride)
    except ConfigurationError as e:
        raise InvalidInputError(str(e)) from e

    return _windows(feature_map, window, stride).mean(axis=(-2, -1))


def avg_pool_grad(d_pooled: np.ndarray, window: int) -> np.ndarray:
    """Gradient of avg_pool(x, window, window) spread back onto x."""
    spread = np.repeat(np.repeat(d_pooled, window, axis=-2), window, axis=-1)
    return spread / (window * window)


def layer_norm(a, gamma, beta, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """gamma * (a - mean) / sqrt(var + eps) + beta, population variance."""
    a = np.asarray(a, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)

    if a.ndim != 1 or a.size == 0:
        raise InvalidInputError("layer_norm expects a non-empty vector")
    if gamma.shape != a.shape or beta.shape != a.shape:
        raise InvalidInputError(
            f"length mismatch: a={a.shape}, gamma={gamma.shape}, beta={beta.shape}"
        )

    return gamma * normalize(a, eps) + beta


def normalize(a: np.ndarray, eps: float = LAYER_NORM_EPS, axis=None) -> np.ndarray:
    """Pre-affine part of layer normalization."""
    mu = a.mean(axis=axis, keepdims=True)
    var = a.var(axis=axis, keepdims=True)
    return (a - mu) / np.sqrt(var + eps)


def activation(kind: str, x):
    """relu, sigmoid or exact-CDF gelu; scalars and arrays alike."""
    x = np.asarray(x, dtype=np.float64)
    if kind == 'relu':
        out = np.maximum(0.0, x)
    elif kind == 'sigmoid':
        out = expit(x)
    elif kind == 'gelu':
        out = x * ndtr(x)
    else:
        raise InvalidInputError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
    return float(out) if out.ndim == 0 else out


def activation_grad(kind: str, x) -> np.ndarray:
    """Elementwise derivative of activation(kind, x) with respect to x."""
    x = np.asarray(x, dtype=np.float64)
    if kind == 'relu':
        return (x > 0).astype(np.float64)
    if kind == 'sigmoid':
        s = expit(x)
        return s * (1.0 - s)
    if kind == 'gelu':
        pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        return ndtr(x) + x * pdf
    raise InvalidInputError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")

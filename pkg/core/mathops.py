"""Deterministic numerical primitives.

Matrices are plain float64 numpy arrays; nothing here mutates its inputs.
"""
import numpy as np

from core.rng import RngStream
from utils.errors import InvalidInputError

Matrix = np.ndarray


def as_matrix(values) -> Matrix:
    """float64 copy-free view where possible."""
    return np.asarray(values, dtype=np.float64)


def softmax(logits) -> np.ndarray:
    """Probability vector(s) along the last axis.

    Subtracts the row maximum before exponentiation, so large logits do not
    overflow. Accepts a single vector or a batch of rows.
    """
    z = as_matrix(logits)
    if z.size == 0 or z.shape[-1] == 0:
        raise InvalidInputError("softmax of an empty vector")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("softmax requires finite logits")

    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def argmax(v, axis: int = -1):
    """Index of the maximum; ties go to the lowest index."""
    arr = np.asarray(v)
    if arr.size == 0 or arr.shape[axis] == 0:
        raise InvalidInputError("argmax of an empty vector")
    # np.argmax returns the first occurrence
    result = np.argmax(arr, axis=axis)
    return int(result) if np.ndim(result) == 0 else result


def gaussian_matrix(rows: int, cols: int, rng: RngStream) -> Matrix:
    """rows x cols i.i.d. standard normal draws from the stream."""
    if rows < 1 or cols < 1:
        raise InvalidInputError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    return rng.standard_normal((rows, cols))


def clamp_unit(m) -> Matrix:
    """Clamp every entry to [0, 1]."""
    return np.clip(as_matrix(m), 0.0, 1.0)

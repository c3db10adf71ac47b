"""Gaussian noise injection at the weight level and the input level."""
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from core.mathops import clamp_unit, gaussian_matrix
from core.rng import RngStream
from models.base import Model
from utils.errors import InvalidInputError


class PerturbMode(str, Enum):
    WEIGHT = 'weight'
    INPUT = 'input'

    @property
    def code(self) -> int:
        """Stable integer used in RNG stream ids."""
        return 0 if self is PerturbMode.WEIGHT else 1


def _check_sigma(sigma: float):
    if not sigma >= 0:
        raise InvalidInputError(f"noise scale must be >= 0, got {sigma}")


def perturb_params(model: Model, sigma: float, rng: RngStream,
                   groups: Optional[Sequence[str]] = None) -> Model:
    """W + sigma * N over every trainable scalar (or only the named groups).

    No clamping; the input model is left untouched.
    """
    _check_sigma(sigma)
    flat = model.flat()
    if sigma == 0:
        return model.with_flat(flat.vector.copy())

    noise = gaussian_matrix(1, flat.size, rng)[0]
    if groups is not None:
        slices = flat.slices()
        unknown = [name for name in groups if name not in slices]
        if unknown:
            raise InvalidInputError(f"unknown parameter groups {unknown}; model has {list(slices)}")
        mask = np.zeros(flat.size, dtype=bool)
        for name in groups:
            mask[slices[name]] = True
        noise = np.where(mask, noise, 0.0)

    return model.with_flat(flat.vector + sigma * noise)


def perturb_input(x, sigma: float, rng: RngStream) -> np.ndarray:
    """x + sigma * N entrywise, clamped back into [0, 1]."""
    _check_sigma(sigma)
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0 or x.size == 0:
        return x.copy()
    noise = gaussian_matrix(1, x.size, rng).reshape(x.shape)
    return clamp_unit(x + sigma * noise)

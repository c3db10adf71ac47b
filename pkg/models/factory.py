"""Construct models from names and architecture descriptors."""
from typing import Dict

import numpy as np

from core.rng import RngStream
from models.base import Model
from models.cnn import TinyCnn
from models.linear import LinearModel
from models.mlp import MlpModel
from utils.errors import ConfigurationError

MODEL_TYPES = {
    LinearModel.kind: LinearModel,
    MlpModel.kind: MlpModel,
    TinyCnn.kind: TinyCnn,
}


def initialize_model(kind: str, rng: RngStream, **architecture) -> Model:
    """Seeded Gaussian init (std 1/sqrt(fan_in)), zero biases."""
    if kind not in MODEL_TYPES:
        raise ConfigurationError(f"unknown model {kind!r}; expected one of {sorted(MODEL_TYPES)}", field='model')
    return MODEL_TYPES[kind].initialize(rng, **architecture)


def build_model(architecture: Dict, params: Dict[str, np.ndarray]) -> Model:
    """Inverse of Model.architecture() plus parameters."""
    arch = dict(architecture)
    kind = arch.pop('kind', None)
    if kind not in MODEL_TYPES:
        raise ConfigurationError(f"unknown model kind {kind!r}", field='architecture')
    return MODEL_TYPES[kind](params, **arch)

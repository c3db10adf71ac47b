"""Model checkpoints.

Format (version 1): a numpy ``.npz`` archive holding
  format_version  int scalar
  architecture    JSON string of Model.architecture()
  layout          JSON string of [[name, shape], ...] in FlatParams order
  params          float64 FlatParams vector
"""
import json
from typing import Dict, Optional

import numpy as np

from models.base import FlatParams, Model
from models.factory import build_model
from utils.errors import ConfigurationError

CHECKPOINT_VERSION = 1


def save_checkpoint(model: Model, path: str):
    flat = model.flat()
    with open(path, 'wb') as f:
        np.savez(
            f,
            format_version=np.int64(CHECKPOINT_VERSION),
            architecture=np.array(json.dumps(model.architecture(), sort_keys=True)),
            layout=np.array(json.dumps([[name, list(shape)] for name, shape in flat.layout])),
            params=flat.vector,
        )


def load_checkpoint(path: str, expected_architecture: Optional[Dict] = None) -> Model:
    """Restore a model; a mismatching expected architecture is an error."""
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive['format_version'])
        architecture = json.loads(str(archive['architecture']))
        layout = tuple((name, tuple(shape)) for name, shape in json.loads(str(archive['layout'])))
        vector = archive['params'].astype(np.float64)

    if version != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {version}", field='checkpoint')
    if expected_architecture is not None and architecture != expected_architecture:
        raise ConfigurationError(
            f"architecture mismatch: checkpoint has {architecture}, expected {expected_architecture}",
            field='checkpoint',
        )

    try:
        params = FlatParams(vector=vector, layout=layout).to_params()
        return build_model(architecture, params)
    except ValueError as e:
        raise ConfigurationError(f"checkpoint does not match its architecture ({e})", field='checkpoint') from e

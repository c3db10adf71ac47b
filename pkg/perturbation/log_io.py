"""PredictionLog CSV persistence.

One row per sample: id, true_label, pred_0..pred_{n-1}, prob_0..prob_{n-1}.
Metadata lives in a ``<file>.meta.json`` sidecar; logs produced elsewhere can
be read without one when the caller supplies sigma, mode and class count.
"""
import json
import os
from typing import Optional

import numpy as np
import pandas as pd

from perturbation.inject import PerturbMode
from perturbation.sampler import LogMetadata, PredictionLog
from utils.errors import InvalidInputError


def sidecar_path(path: str) -> str:
    return path + '.meta.json'


def log_to_frame(log: PredictionLog) -> pd.DataFrame:
    n = log.n
    frame = pd.DataFrame({'id': np.arange(len(log)), 'true_label': log.true_labels})
    preds = pd.DataFrame(log.preds, columns=[f"pred_{i}" for i in range(n)])
    probs = pd.DataFrame(log.true_probs, columns=[f"prob_{i}" for i in range(n)])
    return pd.concat([frame, preds, probs], axis=1)


def write_prediction_log(log: PredictionLog, path: str):
    log_to_frame(log).to_csv(path, index=False, lineterminator='\n')
    with open(sidecar_path(path), 'w') as f:
        json.dump(log.meta.to_dict(), f, indent=2, sort_keys=True)
        f.write('\n')


def read_prediction_log(path: str, sigma: Optional[float] = None, mode: Optional[str] = None,
                        num_classes: Optional[int] = None) -> PredictionLog:
    """Load a log; explicit arguments override the sidecar."""
    frame = pd.read_csv(path, float_precision='round_trip')

    pred_cols = [c for c in frame.columns if c.startswith('pred_')]
    prob_cols = [c for c in frame.columns if c.startswith('prob_')]
    if 'true_label' not in frame.columns or not pred_cols or len(pred_cols) != len(prob_cols):
        raise InvalidInputError(f"{path}: not a prediction log (columns {list(frame.columns)})")

    pred_cols.sort(key=lambda c: int(c.split('_')[1]))
    prob_cols.sort(key=lambda c: int(c.split('_')[1]))
    if 'id' in frame.columns:
        frame = frame.sort_values('id', kind='stable')

    meta_values = {}
    if os.path.exists(sidecar_path(path)):
        with open(sidecar_path(path), 'r') as f:
            meta_values = json.load(f)

    if sigma is not None:
        meta_values['sigma'] = float(sigma)
    if mode is not None:
        meta_values['mode'] = PerturbMode(mode).value
    if num_classes is not None:
        meta_values['num_classes'] = int(num_classes)
    missing = [key for key in ('sigma', 'mode', 'num_classes') if key not in meta_values]
    if missing:
        raise InvalidInputError(f"{path}: no sidecar metadata and no value given for {missing}")
    meta_values['n'] = len(pred_cols)

    return PredictionLog(
        true_labels=frame['true_label'].to_numpy(dtype=np.int64),
        preds=frame[pred_cols].to_numpy(dtype=np.int64),
        true_probs=frame[prob_cols].to_numpy(dtype=np.float64),
        meta=LogMetadata.from_dict(meta_values),
    )

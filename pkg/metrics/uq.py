"""Entropy-based uncertainty metrics computed from prediction logs.

Entropy is the plug-in estimator over the n sampled argmax predictions, in
nats, with no small-sample bias correction.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from perturbation.sampler import PredictionLog
from utils.errors import InvalidInputError

POOLINGS = ('pooled', 'per_sample')


@dataclass(frozen=True)
class SampleStats:
    entropy: float
    mean_correct: float
    certainty: float
    true_label: int


def empirical_entropy(preds: Sequence[int], C: int) -> float:
    """-sum p_c ln p_c over the empirical class proportions."""
    preds = np.asarray(preds, dtype=np.int64)
    if preds.size == 0:
        raise InvalidInputError("entropy of zero predictions")
    if preds.min() < 0 or preds.max() >= C:
        raise InvalidInputError(f"prediction outside [0, {C})")

    p = np.bincount(preds, minlength=C) / preds.size
    p = p[p > 0]
    h = float(-np.sum(p * np.log(p))) + 0.0
    return min(max(h, 0.0), math.log(C))


def entropies(preds: np.ndarray, C: int) -> np.ndarray:
    """Row-wise empirical_entropy of an (N, n) prediction matrix."""
    n = preds.shape[1]
    counts = np.stack([np.sum(preds == c, axis=1) for c in range(C)], axis=1)
    p = counts / n
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return np.clip(-terms.sum(axis=1) + 0.0, 0.0, math.log(C))


def perturbation_index(alpha: float, alpha_sigma: float) -> float:
    """pi = alpha - alpha_sigma; negative values pass through."""
    return alpha - alpha_sigma


def pearson_corr(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson coefficient; 0 when either sequence has zero variance."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidInputError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise InvalidInputError("Pearson correlation needs at least 2 points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0

    dx = x - x.mean()
    dy = y - y.mean()
    r = np.sum(dx * dy) / (np.sqrt(np.sum(dx * dx)) * np.sqrt(np.sum(dy * dy)))
    return float(np.clip(r, -1.0, 1.0))


def psi(alpha_sigma: float, corr: float, lam: float) -> float:
    """psi = alpha_sigma - corr * lambda."""
    if lam < 0:
        raise InvalidInputError(f"lambda must be >= 0, got {lam}")
    return alpha_sigma - corr * lam


def certainty(true_probs: Sequence[float]) -> float:
    """Mean probability assigned to the true class over the draws."""
    values = np.asarray(true_probs, dtype=np.float64)
    if values.size == 0:
        raise InvalidInputError("certainty of zero draws")
    return float(np.mean(values))


def sample_stats(log: PredictionLog) -> List[SampleStats]:
    """One SampleStats per sample, in dataset order."""
    h = entropies(log.preds, log.meta.num_classes)
    mean_correct = log.correct.mean(axis=1)
    cert = log.true_probs.mean(axis=1)
    return [
        SampleStats(entropy=float(h[j]), mean_correct=float(mean_correct[j]),
                    certainty=float(cert[j]), true_label=int(log.true_labels[j]))
        for j in range(len(log))
    ]


def stats_arrays(stats: Sequence[SampleStats]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(entropy, mean_correct, certainty, true_label) columns."""
    return (
        np.array([s.entropy for s in stats], dtype=np.float64),
        np.array([s.mean_correct for s in stats], dtype=np.float64),
        np.array([s.certainty for s in stats], dtype=np.float64),
        np.array([s.true_label for s in stats], dtype=np.int64),
    )


def alpha_and_corr(stats, pooling: str = 'pooled') -> Tuple[float, float]:
    """(alpha_sigma, corr(correctness, entropy)).

    ``pooled`` correlates every (sample, draw) correctness indicator with
    that sample's entropy. With equal n per sample the pooled coefficient
    only depends on per-sample means: the covariance is the covariance of
    (mean_correct, entropy) and the correctness variance is a(1 - a).
    ``per_sample`` correlates mean_correct with entropy directly.
    """
    if isinstance(stats, PredictionLog):
        stats = sample_stats(stats)
    if pooling not in POOLINGS:
        raise InvalidInputError(f"unknown pooling {pooling!r}; expected one of {POOLINGS}")
    if len(stats) < 2:
        raise InvalidInputError(f"need at least 2 samples, got {len(stats)}")

    h, mc, _, _ = stats_arrays(stats)
    alpha_sigma = float(np.mean(mc))

    if pooling == 'per_sample':
        return alpha_sigma, pearson_corr(mc, h)

    var_beta = alpha_sigma * (1.0 - alpha_sigma)
    if var_beta == 0 or np.ptp(h) == 0:
        return alpha_sigma, 0.0

    dh = h - h.mean()
    cov = np.mean((mc - mc.mean()) * dh)
    var_h = np.mean(dh * dh)
    r = cov / np.sqrt(var_beta * var_h)
    return alpha_sigma, float(np.clip(r, -1.0, 1.0))

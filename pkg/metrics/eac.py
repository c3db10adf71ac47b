"""Entropy-accuracy-certainty (EAC) aggregates: entropy windows, their
regression line and the per-class summary."""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from metrics.uq import SampleStats, stats_arrays
from utils.errors import InvalidInputError


@dataclass(frozen=True)
class EntropyBin:
    lo: float
    hi: float
    count: int
    accuracy: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class RegressionLine:
    slope: float
    intercept: float

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class ClassEac:
    """Per-class averages; None when the class has no samples."""

    label: int
    count: int
    entropy_pct: Optional[float]
    accuracy: Optional[float]
    certainty: Optional[float]


def binned_conditional_accuracy(stats: Sequence[SampleStats], num_classes: int, num_bins: int = 20,
                                min_count: int = 5, include_sparse: bool = False) -> List[EntropyBin]:
    """Equal-width entropy windows over [0, ln C]; the last bin is right-closed.

    Bin accuracy pools per-draw correctness of its members. Bins with fewer
    than min_count members are omitted unless include_sparse is set; empty
    bins never appear.
    """
    if len(stats) == 0:
        raise InvalidInputError("no samples to bin")
    if num_bins < 1 or num_classes < 2:
        raise InvalidInputError(f"need num_bins >= 1 and num_classes >= 2 (got {num_bins}, {num_classes})")

    h, mc, _, _ = stats_arrays(stats)
    edges = np.linspace(0.0, math.log(num_classes), num_bins + 1)
    # bin b holds edges[b] <= h < edges[b + 1]; h == ln C joins the last bin
    index = np.clip(np.searchsorted(edges, h, side='right') - 1, 0, num_bins - 1)

    bins = []
    for b in range(num_bins):
        members = index == b
        count = int(members.sum())
        if count == 0 or (count < min_count and not include_sparse):
            continue
        bins.append(EntropyBin(lo=float(edges[b]), hi=float(edges[b + 1]), count=count,
                               accuracy=float(mc[members].mean())))
    return bins


def regression_line(bins: Sequence[EntropyBin]) -> Optional[RegressionLine]:
    """Unweighted least squares of bin accuracy on bin midpoint; None if not computable."""
    if len(bins) < 2:
        return None

    x = np.array([b.midpoint for b in bins])
    y = np.array([b.accuracy for b in bins])
    dx = x - x.mean()
    sxx = np.sum(dx * dx)
    if sxx == 0:
        return None

    slope = float(np.sum(dx * (y - y.mean())) / sxx)
    return RegressionLine(slope=slope, intercept=float(y.mean() - slope * x.mean()))


def per_class_eac(stats: Sequence[SampleStats], C: int) -> List[ClassEac]:
    """Group by true label; entropy as a percentage of ln C."""
    h, mc, cert, labels = stats_arrays(stats)
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise InvalidInputError(f"labels outside [0, {C})")

    frame = pd.DataFrame({'label': labels, 'entropy': h, 'accuracy': mc, 'certainty': cert})
    grouped = frame.groupby('label').agg(
        count=('entropy', 'size'),
        entropy=('entropy', 'mean'),
        accuracy=('accuracy', 'mean'),
        certainty=('certainty', 'mean'),
    ).reindex(range(C))

    max_entropy = math.log(C)
    rows = []
    for label, row in grouped.iterrows():
        if pd.isna(row['count']):
            rows.append(ClassEac(label=int(label), count=0, entropy_pct=None, accuracy=None, certainty=None))
            continue
        rows.append(ClassEac(
            label=int(label),
            count=int(row['count']),
            entropy_pct=float(100.0 * row['entropy'] / max_entropy) if max_entropy > 0 else 0.0,
            accuracy=float(row['accuracy']),
            certainty=float(row['certainty']),
        ))
    return rows

"""Labeled datasets: MNIST ingestion and synthetic blobs."""
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core.mathops import clamp_unit
from core.rng import RngStream
from dataset.idx import parse_idx_images, parse_idx_labels, read_idx_file
from utils.errors import DataFileError, InvalidInputError
from utils.logger import experiment_logger

MNIST_CLASSES = 10


@dataclass(frozen=True)
class LabeledDataset:
    """Unit-interval images (N, H, W) paired with integer labels (N,)."""

    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.images.ndim != 3:
            raise InvalidInputError(f"images must be (N, H, W), got shape {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise InvalidInputError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if self.num_classes < 1:
            raise InvalidInputError("num_classes must be >= 1")
        if len(self.labels):
            bad = np.flatnonzero((self.labels < 0) | (self.labels >= self.num_classes))
            if bad.size:
                raise InvalidInputError(
                    f"label {int(self.labels[bad[0]])} at index {int(bad[0])} "
                    f"outside [0, {self.num_classes})"
                )
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise InvalidInputError("pixels must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    @property
    def flat(self) -> np.ndarray:
        """(N, H*W) view of the same buffer."""
        return self.images.reshape(len(self.images), -1)

    def subset(self, indices: Sequence[int]) -> 'LabeledDataset':
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[idx], self.labels[idx], self.num_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


def make_dataset(raw_images, raw_labels, num_classes: int = MNIST_CLASSES) -> LabeledDataset:
    """Scale u8 pixels to [0, 1] by /255; pairing order is preserved."""
    raw_images = np.asarray(raw_images)
    raw_labels = np.asarray(raw_labels, dtype=np.int64)

    if len(raw_images) != len(raw_labels):
        raise InvalidInputError(
            f"length mismatch: {len(raw_images)} images, {len(raw_labels)} labels"
        )

    images = raw_images.astype(np.float64) / 255.0
    if images.ndim == 2:
        images = images[:, :, None]
    return LabeledDataset(images=images, labels=raw_labels, num_classes=num_classes)


def class_directions(C: int, d: int) -> np.ndarray:
    """C pairwise distinct unit-norm center directions in R^d, shape (C, d).

    With C <= 2d class c gets +e_{c//2} (even c) or -e_{c//2} (odd c).
    Beyond that the classes sit at equal angles on the unit circle of the
    first two axes. One axis only holds two distinct directions.
    """
    if C < 1 or d < 1:
        raise InvalidInputError(f"need C >= 1 and d >= 1 (got {C}, {d})")
    directions = np.zeros((C, d))
    if C <= 2 * d:
        for c in range(C):
            directions[c, c // 2] = 1.0 if c % 2 == 0 else -1.0
        return directions
    if d == 1:
        raise InvalidInputError(f"{C} classes need at least 2 dimensions, got d=1")
    angles = 2.0 * np.pi * np.arange(C) / C
    directions[:, 0] = np.cos(angles)
    directions[:, 1] = np.sin(angles)
    return directions


def synthetic_blobs(C: int, d: int, per_class: int, separation: float, rng: RngStream) -> LabeledDataset:
    """Gaussian blobs rescaled into the unit interval.

    Class c is centered at separation * class_directions(C, d)[c] with unit
    isotropic noise; the affine map sends [-(separation+4), separation+4] onto
    [0, 1] and anything beyond is clamped. Images have shape (d, 1).
    """
    if C < 2 or d < 1 or separation <= 0 or per_class < 0:
        raise InvalidInputError(
            f"need C >= 2, d >= 1, separation > 0, per_class >= 0 (got {C}, {d}, {separation}, {per_class})"
        )
    centers = separation * class_directions(C, d)

    labels = np.repeat(np.arange(C, dtype=np.int64), per_class)
    if per_class == 0:
        return LabeledDataset(np.zeros((0, d, 1)), labels, C)

    noise = rng.standard_normal((C * per_class, d))
    points = centers[labels] + noise

    half_width = separation + 4.0
    pixels = clamp_unit((points + half_width) / (2.0 * half_width))
    return LabeledDataset(pixels[:, :, None], labels, C)


def seeded_subset(dataset: LabeledDataset, size: Optional[int], rng: RngStream) -> LabeledDataset:
    """Deterministic subset in original order; None or oversize keeps everything."""
    if size is None or size >= len(dataset):
        return dataset
    chosen = np.sort(rng.permutation(len(dataset))[:size])
    return dataset.subset(chosen)


def _resolve(path: str) -> str:
    """Accept either the plain file or its .gz sibling."""
    if os.path.exists(path):
        return path
    if os.path.exists(path + '.gz'):
        return path + '.gz'
    raise FileNotFoundError(f"IDX file not found: {path} (or {path}.gz)")


def load_idx_pair(images_path: str, labels_path: str, num_classes: int = MNIST_CLASSES) -> LabeledDataset:
    """Read one images/labels IDX pair into a dataset."""
    images_path = _resolve(images_path)
    labels_path = _resolve(labels_path)

    raw_images = parse_idx_images(read_idx_file(images_path))
    raw_labels = parse_idx_labels(read_idx_file(labels_path))
    try:
        dataset = make_dataset(raw_images, raw_labels, num_classes)
    except InvalidInputError as e:
        raise DataFileError(f"{images_path} / {labels_path}: {e}") from e

    experiment_logger.logger.info(
        f"Loaded {len(dataset)} samples of shape {dataset.image_shape} from {images_path}"
    )
    return dataset

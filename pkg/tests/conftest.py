"""Shared fixtures: IDX encoders and a small synthetic MNIST-shaped corpus."""
import gzip
import os
import struct

import numpy as np
import pytest

from dataset.idx import IMAGE_MAGIC, LABEL_MAGIC
from utils.config import MNIST_FILES


def encode_idx_images(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    return struct.pack('>IIII', IMAGE_MAGIC, count, rows, cols) + images.tobytes()


def encode_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack('>II', LABEL_MAGIC, len(labels)) + labels.tobytes()


def digit_like_images(labels: np.ndarray, rng: np.random.Generator, size: int = 28) -> np.ndarray:
    """u8 images whose bright bar position encodes the label, plus speckle noise."""
    images = rng.integers(0, 40, size=(len(labels), size, size)).astype(np.uint8)
    for i, label in enumerate(labels):
        row = 2 + 2 * int(label)
        images[i, row:row + 2, 4:24] = 230
    return images


def write_idx_corpus(directory, train_size: int = 300, test_size: int = 200, seed: int = 0,
                     compress: bool = False) -> str:
    """MNIST-named IDX files under directory; returns its path."""
    rng = np.random.default_rng(seed)
    os.makedirs(directory, exist_ok=True)

    train_labels = np.arange(train_size) % 10
    test_labels = (np.arange(test_size) * 7) % 10
    payloads = {
        'train_images': encode_idx_images(digit_like_images(train_labels, rng)),
        'train_labels': encode_idx_labels(train_labels),
        'test_images': encode_idx_images(digit_like_images(test_labels, rng)),
        'test_labels': encode_idx_labels(test_labels),
    }
    for key, payload in payloads.items():
        name = MNIST_FILES[key]
        if compress:
            name, payload = name + '.gz', gzip.compress(payload, mtime=0)
        with open(os.path.join(directory, name), 'wb') as f:
            f.write(payload)
    return str(directory)


@pytest.fixture
def idx_corpus(tmp_path):
    return write_idx_corpus(tmp_path / 'mnist')


@pytest.fixture
def rng():
    return np.random.default_rng(42)

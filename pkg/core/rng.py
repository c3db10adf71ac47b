"""Seeded, hierarchically derived random streams.

Every random draw in an experiment comes from an ``RngStream`` identified by
the master seed and a tuple of small integers (purpose, grid index, draw
index, chunk index, ...). Streams are derived with numpy's ``SeedSequence``,
which hashes ``(entropy, spawn_key)`` into the PCG64 state, so:

* the same ``(master_seed, stream_id)`` yields the same variates everywhere;
* distinct ids yield independent sequences, whatever order they are used in.

Normal variates use ``Generator.standard_normal`` (ziggurat) on PCG64.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.errors import InvalidInputError

# Stream purposes (first element of every stream id)
PURPOSE_INIT = 1
PURPOSE_SHUFFLE = 2
PURPOSE_PERTURB = 3
PURPOSE_SUBSET = 4
PURPOSE_SYNTHETIC = 5


@dataclass(frozen=True)
class RngStream:
    """Identifier of one reproducible stream of variates."""

    master_seed: int
    stream_id: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.master_seed < 0 or any(part < 0 for part in self.stream_id):
            raise InvalidInputError("seed and stream id parts must be non-negative")

    def child(self, *parts: int) -> 'RngStream':
        """Derive a sub-stream by extending the id."""
        return RngStream(self.master_seed, self.stream_id + tuple(int(p) for p in parts))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(seq))

    def standard_normal(self, shape) -> np.ndarray:
        return self.generator().standard_normal(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator().permutation(n)

"""Stateless Gaussian streams indexed by ``(seed, stream_id)``.

Each stream is a Philox counter-based generator keyed on the pair, so any
trial's test vectors can be regenerated without replaying the others. This is
what lets batches run in any order, on any number of workers, and still
produce bit-identical values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RandomSource"]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomSource:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")

    def generator(self) -> np.random.Generator:
        key = ((self.seed & _MASK64) << 64) | (self.stream_id & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))

    def gaussian_vectors(self, count: int, dim: int) -> np.ndarray:
        """``count`` i.i.d. N(0, I_dim) vectors as the rows of a (count, dim) array."""
        return self.generator().standard_normal((count, dim))

    def spawn(self, stream_id: int) -> "RandomSource":
        return RandomSource(self.seed, stream_id)

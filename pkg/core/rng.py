"""Seeded, splittable random streams.

Every random draw in the package goes through an RngStream. A stream wraps a
numpy SeedSequence and a PCG64 generator; substreams are derived from the
sequence's entropy plus a path of integer keys, so ``stream.split(3)`` is the
same generator no matter how many draws the parent has already made or which
worker asks for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from core.errors import ConfigurationError

_SEED_MASK = (1 << 64) - 1


@dataclass
class RngStream:
    seed: int
    path: tuple[int, ...] = ()
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.seed < 0 or self.seed > _SEED_MASK:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for key in self.path:
            if key < 0:
                raise ConfigurationError(f"substream keys must be non-negative, got {key}")
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def split(self, index: int) -> RngStream:
        """Return the independent child stream number *index*."""
        return RngStream(self.seed, self.path + (index,))

    def spawn(self, count: int) -> list[RngStream]:
        return [self.split(i) for i in range(count)]

    def uniform(self, lo: float, hi: float, size) -> np.ndarray:
        return self._generator.uniform(lo, hi, size=size)

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self._generator.normal(0.0, scale, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)


# Named substream keys so that data generation, initialization, shuffling and
# Monte Carlo estimates never share draws.
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_SCALE = 3
STREAM_FOLDS = 4
STREAM_REPLICATES = 5
STREAM_TUNING = 6

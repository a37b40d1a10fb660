"""Seeded random streams.

Streams are keyed by ``(seed, *path)`` so independent consumers (parameter
init, batch sampling, dropout, held-out data) never share state and each is
reproducible on its own.
"""
from __future__ import annotations

import numpy as np


class Rng:
    def __init__(self, seed: int, *path: int):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.path = tuple(int(p) for p in path)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *self.path])))

    def child(self, *path: int) -> "Rng":
        return Rng(self.seed, *self.path, *path)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, mean=0.0, std=1.0, size=None) -> np.ndarray:
        return self._gen.normal(mean, std, size)

    def integers(self, low, high, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size)

    def bernoulli(self, p: float, size) -> np.ndarray:
        return self._gen.random(size) < p

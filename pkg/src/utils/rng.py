"""Seeded random streams for reproducible simulation.

One master seed feeds every stochastic stage. Each stage asks for a named
stream, so the draws of one stage never depend on how many numbers another
stage consumed.
"""

import zlib
from typing import Dict

import numpy as np


def stream_key(name: str) -> int:
    """Stable integer key for a stream name."""
    return zlib.crc32(name.encode("utf-8"))


class StreamFactory:
    """Hands out independent numpy generators derived from one master seed."""

    def __init__(self, seed: int):
        self._seed = int(seed)
        self._streams: Dict[str, np.random.Generator] = {}

    @property
    def seed(self) -> int:
        return self._seed

    def stream(self, name: str) -> np.random.Generator:
        """Return the generator for ``name``, creating it on first use."""
        if name not in self._streams:
            self._streams[name] = self.fresh(name)
        return self._streams[name]

    def fresh(self, name: str) -> np.random.Generator:
        """Return a new generator for ``name`` positioned at its start."""
        seq = np.random.SeedSequence(self._seed, spawn_key=(stream_key(name),))
        return np.random.default_rng(seq)

    def fork(self, name: str, index: int) -> np.random.Generator:
        """Create a child generator for sub-task ``index`` of stream ``name``."""
        seq = np.random.SeedSequence(self._seed, spawn_key=(stream_key(name), int(index)))
        return np.random.default_rng(seq)


def derive_rng(seed: int, name: str) -> np.random.Generator:
    """Shortcut for a single named stream."""
    return StreamFactory(seed).fresh(name)

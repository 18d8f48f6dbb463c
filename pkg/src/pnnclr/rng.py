"""Deterministic, counter-based random streams.

Every random draw in the package comes from a PCG64 generator keyed by
(seed, *key) through numpy's SeedSequence. Streams are stateless: the same
(seed, key) always yields the same draws, on any platform, regardless of
call order or parallelism. Training code derives one child stream per
(purpose, step, element) so that checkpoints only need to store the seed.
"""

from __future__ import annotations

import numpy as np

# purpose tags for derived substreams
TAG_INIT = 1
TAG_AUG = 2
TAG_PNN = 3
TAG_SHUFFLE = 4
TAG_DATA = 5
TAG_THEORY = 6


class RngStream:
    """A (seed, key) pair naming one deterministic PCG64 stream."""

    __slots__ = ("seed", "key")

    def __init__(self, seed: int, key: tuple = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)

    def child(self, *key) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream.

        Calling twice returns generators that produce identical sequences;
        derive a child per independent use instead of reusing one stream.
        """
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, Generator, or int seed; return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()

"""Deterministic random streams.

Every stochastic routine takes either a ``numpy.random.Generator`` (Python-level
code) or a 32-bit kernel seed (numba kernels, which drive numba's internal
Mersenne Twister).  Both are derived from ``(master_seed, tag, index)`` through
``numpy.random.SeedSequence``, whose entropy pool hashes the three words with a
64-bit mixing function.  Identical triples give identical streams; distinct
triples give statistically independent ones.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

RNG_DESCRIPTION = "SeedSequence(master,crc32(tag),index) -> PCG64 (python) / MT19937 (numba kernels)"


def _words(master_seed: int, tag: str, index: int) -> list[int]:
    return [int(master_seed) & (2**64 - 1), zlib.crc32(tag.encode()), int(index)]


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    tag: str = "default"
    index: int = 0

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(_words(self.master_seed, self.tag, self.index))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def kernel_seed(self) -> int:
        return int(self.seed_sequence().generate_state(1, dtype=np.uint32)[0])

    def child(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, self.tag, index)


def generator(master_seed: int, tag: str = "default", index: int = 0) -> np.random.Generator:
    return RngStream(master_seed, tag, index).generator()


def kernel_seeds(master_seed: int, tag: str, count: int, start: int = 0) -> np.ndarray:
    """uint32 seeds for replicas ``start .. start+count-1`` of stream ``tag``."""
    return np.array(
        [RngStream(master_seed, tag, start + r).kernel_seed() for r in range(count)],
        dtype=np.uint32,
    )


def as_kernel_seed(rng) -> int:
    """Accept an int seed or a Generator; return a uint32 seed for numba kernels."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**32, dtype=np.uint64))
    if rng is None:
        raise ValueError("a seed or Generator is required")
    return int(rng) % 2**32


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)

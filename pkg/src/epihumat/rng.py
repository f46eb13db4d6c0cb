"""Named random streams derived from a single root seed.

Every module draws from its own stream so that adding draws in one place
never shifts the sequence seen by another (golden files stay stable).
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = (
    "population",
    "placement",
    "network",
    "critical",
    "seeding",
    "mobility",
    "humat",
    "epidemic",
    "contagion",
    "repair",
)


def stream(seed: int, name: str) -> np.random.Generator:
    """Return the generator for ``name`` under ``seed``.

    The spawn key is the CRC32 of the stream name, which is stable across
    Python versions and processes (unlike ``hash``).
    """
    key = zlib.crc32(name.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(key,))
    return np.random.Generator(np.random.PCG64(ss))


class Streams:
    """Lazily created per-module generators for one replicate."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gens: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._gens:
            self._gens[name] = stream(self.seed, name)
        return self._gens[name]


def replicate_seed(root_seed: int, index: int) -> int:
    return int(root_seed) + int(index)

"""Seeded, labelled random streams.

Each stream is a numpy ``PCG64`` generator keyed by ``(seed, crc32(label))``
through ``SeedSequence``. PCG64 output is specified bit-for-bit by numpy and
does not depend on platform, and crc32 (unlike ``hash``) is not salted per
process, so a given ``(seed, label)`` pair always yields the same sequence.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

UINT32_MAX = 2**32 - 1


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


@dataclass
class SeededRng:
    seed: int
    stream_label: str = "default"
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) <= UINT32_MAX:
            raise ValueError(f"seed must be an unsigned 32-bit integer, got {self.seed}")
        self.seed = int(self.seed)
        self.reset()

    def reset(self) -> None:
        """Rewind the stream to its first draw."""
        ss = np.random.SeedSequence([self.seed, _label_key(self.stream_label)])
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, label: str) -> "SeededRng":
        """Independent stream for a sub-purpose, e.g. ``rng.child("init")``."""
        return SeededRng(self.seed, f"{self.stream_label}/{label}")

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, size=None, scale=1.0):
        return self._gen.normal(0.0, scale, size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high, size=None):
        """Uniform integers in ``[low, high)``."""
        return self._gen.integers(low, high, size=size)

    def state(self) -> dict:
        return self._gen.bit_generator.state

    def set_state(self, state: dict) -> None:
        self._gen.bit_generator.state = state


def seeded_shuffle(items, rng: SeededRng) -> list:
    """Fisher-Yates shuffle; returns a new list and leaves ``items`` alone."""
    out = list(items)
    n = len(out)
    if n < 2:
        return out
    # j_i uniform on [0, i] for i = n-1 .. 1, drawn in one call
    highs = np.arange(n, 1, -1)
    draws = rng.integers(0, highs)
    for i, j in zip(range(n - 1, 0, -1), draws):
        out[i], out[j] = out[j], out[i]
    return out

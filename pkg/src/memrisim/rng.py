"""Deterministic, splittable random streams built on the Philox bit generator.

Every stochastic operation in the package takes either an :class:`RngStream`
(a value identifying a reproducible stream) or an already-instantiated
``numpy.random.Generator``.  Streams are cheap to derive: campaign code hands
each task ``stream.child(network_index, repeat_index)`` and gets statistically
independent, replayable randomness.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(state: int, value: int) -> int:
    # SplitMix64 finalizer over the combined words; stable across platforms.
    x = (state + _GOLDEN + value) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def _index_to_int(index) -> int:
    if isinstance(index, str):
        digest = hashlib.blake2s(index.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    return int(index) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Handle for a reproducible random stream.

    Identical ``(seed, stream)`` pairs produce identical draw sequences on
    every platform; distinct ``stream`` values are independent (Philox is
    counter-based, so keys never collide in practice).
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *indices) -> "RngStream":
        """Derive a sub-stream; indices may be ints or short strings."""
        s = self.stream
        for index in indices:
            s = _mix64(s, _index_to_int(index))
        return RngStream(self.seed, s)


def as_generator(rng) -> np.random.Generator:
    """Coerce an RngStream or Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")

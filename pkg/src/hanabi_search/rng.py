"""Counter-based SplitMix64 generator.

Every random decision in the package (deck shuffles, determinization draws,
rollout seeds) goes through these functions so that results are identical
across platforms, processes and the compiled/pure-Python kernels.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_INV53 = 1.0 / (1 << 53)


def fmix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """Fold any number of integers into one well-mixed 64-bit key."""
    h = 0x243F6A8885A308D3
    for v in values:
        h = fmix64(((h ^ (v & MASK64)) + GOLDEN) & MASK64)
    return h


def _fmix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def mix64_array(prefix, counters) -> np.ndarray:
    """``mix64(*prefix, c)`` for every ``c`` in ``counters``, vectorized."""
    h = np.uint64(mix64(*prefix)) if prefix else np.uint64(0x243F6A8885A308D3)
    c = np.asarray(counters, dtype=np.uint64)
    return _fmix64_np((h ^ c) + np.uint64(GOLDEN))


def counter_value(key: int, counter: int) -> int:
    """The ``counter``-th output of the SplitMix64 stream keyed by ``key``."""
    return fmix64((key + (counter + 1) * GOLDEN) & MASK64)


def stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


class SplitMix64:
    """Sequential view of the counter-based stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return fmix64(self.state)

    def below(self, n: int) -> int:
        # multiply-shift on the top 32 bits; n must fit in 32 bits
        return ((self.next64() >> 32) * n) >> 32

    def random(self) -> float:
        return (self.next64() >> 11) * _INV53

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, last index first."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

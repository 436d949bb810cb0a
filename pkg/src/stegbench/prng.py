"""Deterministic keyed randomness for embedding simulation.

Embedding keys must reproduce bit-for-bit on any platform, so this module
pins the generator algorithm instead of delegating to a library RNG.  The
stream is splitmix64: output word k is ``mix64(seed + (k + 1) * GAMMA)``
with the usual constants

    GAMMA = 0x9E3779B97F4A7C15
    mix64(z) = h(h(z ^ (z >> 30)) ^ (h(z) >> 27)) ...  (see ``mix64``)

Being counter-based, any prefix of the stream can be produced in one
vectorized pass.  Permutations come from a Fisher-Yates shuffle driven by
this stream, with rejection sampling for unbiased bounded draws.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def mix64(z: np.ndarray | int) -> np.ndarray | int:
    """splitmix64 finalizer; accepts a uint64 scalar or array."""
    z = np.uint64(z) if np.isscalar(z) else np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def stream(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Words ``offset .. offset+count-1`` of the splitmix64 stream for seed."""
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counters = base + idx * np.uint64(_GAMMA)
        return mix64(counters)


def derive_seed(seed: int, index: int) -> int:
    """Stable per-item sub-seed, e.g. per-image keys from a master seed."""
    mixed = mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        salted = mixed ^ (np.uint64(index & 0xFFFFFFFFFFFFFFFF) * np.uint64(_GAMMA))
    return int(mix64(salted))


class WordSource:
    """Sequential reader over the splitmix64 stream, buffered in chunks."""

    def __init__(self, seed: int, chunk: int = 4096):
        self._seed = seed
        self._chunk = chunk
        self._buf: list[int] = []
        self._pos = 0
        self._offset = 0

    def next_word(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = stream(self._seed, self._chunk, self._offset).tolist()
            self._offset += self._chunk
            self._pos = 0
        word = self._buf[self._pos]
        self._pos += 1
        return word

    def next_below(self, bound: int) -> int:
        """Uniform draw in [0, bound); rejection keeps it unbiased."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            word = self.next_word()
            if word < limit:
                return word % bound


def permutation(seed: int, n: int) -> np.ndarray:
    """Fisher-Yates permutation of range(n) driven by the seed's stream."""
    perm = np.arange(n, dtype=np.int64)
    src = WordSource(seed)
    view = perm.tolist()
    for i in range(n - 1, 0, -1):
        j = src.next_below(i + 1)
        view[i], view[j] = view[j], view[i]
    return np.asarray(view, dtype=np.int64)


def message_words(seed: int, count: int) -> np.ndarray:
    """Raw words backing a message stream (bit = lowest bit, sign = next bit)."""
    return stream(seed, count)


def message_bits_signs(seed: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-position message bit (0/1) and change sign (+1/-1)."""
    words = message_words(seed, count)
    bits = (words & np.uint64(1)).astype(np.int64)
    signs = 1 - 2 * ((words >> np.uint64(1)) & np.uint64(1)).astype(np.int64)
    return bits, signs

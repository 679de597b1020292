"""Deterministic counter-based random streams (SplitMix64).

Every value is a pure function of (key, counter), where the key is derived
by folding a 64-bit seed with an arbitrary tuple of stream ids (ints or
strings).  This gives reproducible, order-independent substreams: trial k
of role "bob" always sees the same numbers regardless of what other
streams were consumed, and the same draws can be evaluated one at a time
or as whole numpy arrays (see :func:`bulk_uniforms`).

Determinism holds across platforms for this implementation; bit-exact
agreement with other generators is not a goal.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INT_TAG = 0xD6E8FEB86659FD93
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# 2^-53: top 53 bits of a 64-bit word map to [0, 1)
_U53 = 1.0 / 9007199254740992.0


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit avalanche mix."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _id_word(stream_id) -> int:
    """Map a stream id (int or str) to a 64-bit word."""
    if isinstance(stream_id, bool):
        raise TypeError("stream ids must be int or str, not bool")
    if isinstance(stream_id, int):
        return _mix64((stream_id & _MASK64) ^ _INT_TAG)
    if isinstance(stream_id, str):
        h = _FNV_OFFSET
        for b in stream_id.encode("utf-8"):
            h = ((h ^ b) * _FNV_PRIME) & _MASK64
        return h
    raise TypeError(f"stream ids must be int or str, got {type(stream_id).__name__}")


def stream_key(seed: int, *ids) -> int:
    """Derive the 64-bit key of the substream (seed, *ids)."""
    key = _mix64(seed & _MASK64)
    for stream_id in ids:
        key = _mix64(key ^ _id_word(stream_id))
    return key


def value_at(key: int, counter: int) -> int:
    """The raw 64-bit word of stream `key` at position `counter`."""
    return _mix64((key + ((counter + 1) * _GOLDEN)) & _MASK64)


def trial_keys(seed: int, role: str, trial_ids: np.ndarray) -> np.ndarray:
    """Vectorized stream_key(seed, role, t) for an array of trial ids."""
    base = np.uint64(stream_key(seed, role))
    words = _mix64_np(trial_ids.astype(np.uint64) ^ np.uint64(_INT_TAG))
    return _mix64_np(base ^ words)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def bulk_uniforms(keys: np.ndarray, counter: int) -> np.ndarray:
    """Uniform [0,1) draws at position `counter` of many streams at once.

    Bit-identical to RandomStream(key).skip(counter).uniform() per key.
    """
    words = _mix64_np(keys + np.uint64((counter + 1) * _GOLDEN & _MASK64))
    return (words >> np.uint64(11)).astype(np.float64) * _U53


def scaled_index(u, n: int):
    """Map uniform u in [0,1) to an integer in 0..n-1 (shared scalar/array path)."""
    if isinstance(u, np.ndarray):
        return np.minimum((u * n).astype(np.int64), n - 1)
    return min(int(u * n), n - 1)


class RandomStream:
    """One sequentially-consumed random stream.

    Instances are single-owner: parallel consumers must derive their own
    substreams via :meth:`substream`.
    """

    __slots__ = ("key", "counter")

    def __init__(self, seed: int, *ids):
        self.key = stream_key(seed, *ids)
        self.counter = 0

    @classmethod
    def _from_key(cls, key: int) -> "RandomStream":
        stream = cls.__new__(cls)
        stream.key = key
        stream.counter = 0
        return stream

    def substream(self, *ids) -> "RandomStream":
        """Independent child stream; does not advance this stream."""
        key = self.key
        for stream_id in ids:
            key = _mix64(key ^ _id_word(stream_id))
        return RandomStream._from_key(key)

    def skip(self, n: int) -> None:
        """Advance the counter without producing values."""
        self.counter += n

    def uniform(self) -> float:
        """Next uniform draw in [0, 1)."""
        word = value_at(self.key, self.counter)
        self.counter += 1
        return (word >> 11) * _U53

    def uniforms(self, n: int) -> np.ndarray:
        """Next n uniform draws as a float64 array."""
        counters = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        words = _mix64_np(np.uint64(self.key) + (counters + np.uint64(1)) * np.uint64(_GOLDEN))
        self.counter += n
        return (words >> np.uint64(11)).astype(np.float64) * _U53

    def randint(self, n: int) -> int:
        """Next integer uniform on 0..n-1."""
        if n < 1:
            raise ValueError("n must be positive")
        return scaled_index(self.uniform(), n)

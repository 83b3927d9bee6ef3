"""Seedable random primitives shared by the image toolkit and ID generators.

The stream is a splitmix-style 64-bit state advance (state += golden-ratio
constant, then a two-round multiply/xor mix); Gaussian draws come from the
Box-Muller transform over that stream. A given seed always reproduces the
same outputs within this package, but no cross-version or cross-platform
bit-equality is promised.
"""

from __future__ import annotations

import secrets

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Scalar form of the stream; cheap to seed, one u64 per call."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)


def token_hex(rng: SplitMix64 | None, nbytes: int = 8) -> str:
    """Lowercase hex token: from the seeded stream, or system entropy if rng is None."""
    if rng is None:
        return secrets.token_hex(nbytes)
    words = [f"{rng.next_u64():016x}" for _ in range((nbytes + 7) // 8)]
    return "".join(words)[: nbytes * 2]


def u64_block(seed: int, count: int) -> np.ndarray:
    """First `count` outputs of the seed's stream, vectorized.

    The state after k steps is seed + k * golden in closed form, so the
    whole block evaluates without a Python loop. Matches SplitMix64 exactly.
    """
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + steps * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
    return z


def gaussian(seed: int, count: int) -> np.ndarray:
    """Standard-normal draws via Box-Muller over the seeded stream."""
    pairs = (count + 1) // 2
    words = u64_block(seed, 2 * pairs)
    # 53-bit mantissas; the +1 keeps u1 in (0, 1] so the log stays finite
    u1 = ((words[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (words[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return out[:count]

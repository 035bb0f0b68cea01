"""SplitMix64 pseudo-random generator.

All randomness in this package (source-term sampling, weight
initialization, batch shuffling, stability sampling) funnels through this
one generator so that a given integer seed reproduces the exact same
stream on any platform and in any implementation of the algorithm.

The algorithm is the standard SplitMix64: the state advances by the
64-bit golden-ratio constant and the k-th output is a bijective mix of
``seed + k * GOLDEN``.  Doubles are formed from the top 53 bits.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SplitMix64"]

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit generator with scalar and vectorized draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & _MASK
        return _mix(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform double in [lo, hi) from the top 53 bits of one draw."""
        return lo + (hi - lo) * ((self.next_u64() >> 11) * _INV_2_53)

    def uniforms(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        """Vectorized ``uniform``; consumes exactly n draws from the stream."""
        ks = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + np.uint64(GOLDEN) * ks
        self._state = (self._state + n * GOLDEN) & _MASK
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        return lo + (hi - lo) * ((z >> np.uint64(11)) * _INV_2_53)

    def randint_below(self, n: int) -> int:
        """Integer in [0, n); tiny floor bias (~2^-53) is irrelevant here."""
        return min(int(self.uniform() * n), n - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n)."""
        return np.argsort(self.uniforms(n), kind="stable")

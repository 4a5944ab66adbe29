"""Portable deterministic random number generation.

Everything here is defined in terms of the splitmix64 algorithm so that a
reimplementation in another language can reproduce the exact streams:

  state <- (state + 0x9E3779B97F4A7C15) mod 2^64
  z <- state
  z <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
  z <- (z XOR (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
  output <- z XOR (z >> 31)

Uniform doubles in [0, 1) take the top 53 bits: (u >> 11) * 2^-53.

Substreams are derived with ``mix64(seed, index)``: run the splitmix64
finalizer on ``index + 1``, XOR into ``seed``, and finalize once more.
Beta variates use the inverse-CDF transform (one uniform per variate),
so the draw count per example is fixed and platform independent.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betaincinv

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def _finalize(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(seed: int, index: int) -> int:
    """Derive a substream seed from (seed, index), both 64-bit."""
    return _finalize((seed ^ _finalize((index + 1) & _MASK64)) & _MASK64)


class SplitMix64:
    """Sequential splitmix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _finalize(self._state)

    def next_float(self) -> float:
        return (self.next_uint64() >> 11) * 2.0 ** -53

    def next_floats(self, count: int) -> np.ndarray:
        return np.array([self.next_float() for _ in range(count)])

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates using next_uint64 modulo rejection."""
        n = len(items)
        for i in range(n - 1, 0, -1):
            # rejection sampling keeps the index distribution exactly uniform
            bound = i + 1
            limit = (2**64 // bound) * bound
            while True:
                u = self.next_uint64()
                if u < limit:
                    break
            j = u % bound
            items[i], items[j] = items[j], items[i]


def beta_inverse_cdf(u, a, b) -> np.ndarray:
    """Beta(a, b) variates from uniforms via the regularized incomplete
    beta inverse. Vectorized over all arguments."""
    return betaincinv(a, b, u)

"""Seedable PRNG used wherever reproducibility across machines matters.

Level generation and synthetic sources must produce identical output for the
same seed on any platform, so we pin the algorithm instead of relying on a
runtime's default generator. The generator is splitmix64 (Steele et al.'s
SplitMix stream), chosen because it is tiny, well known, and trivially
portable: 64-bit wrapping integer arithmetic only.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64 stream; state advances by the golden-gamma constant."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        # 53-bit mantissa gives an exact dyadic fraction in [0, 1)
        u = (self.next_u64() >> 11) * (2.0**-53)
        return lo + u * (hi - lo)

    def below(self, n: int) -> int:
        """Integer in [0, n) without modulo bias (Lemire reduction)."""
        return (self.next_u64() * n) >> 64

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller, cosine branch only so every draw consumes exactly
        # two uniforms (keeps the stream position predictable).
        u1 = ((self.next_u64() >> 11) + 1) * (2.0**-53)  # (0, 1], log-safe
        u2 = (self.next_u64() >> 11) * (2.0**-53)
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

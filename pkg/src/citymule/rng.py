"""Portable multi-stream pseudo-random generator for reproducible scenarios.

Scenario construction must be bit-reproducible across platforms and across
the 0..99 seed sweep, so we use PCG32 (O'Neill's pcg32 / PCG-XSH-RR with a
64-bit LCG state), implemented directly from its published recurrence:

    state'  = state * 6364136223846793005 + inc        (mod 2^64)
    output  = rotr32(((state >> 18) ^ state) >> 27, state >> 59)

Every entity category (routes, buses, sensors, pedestrian processes, ...)
gets its own independent stream by seeding with the same master seed but a
distinct stream id, which PCG32 supports natively through the increment.

Uniform doubles use 53 bits assembled from two 32-bit outputs, so draws do
not depend on platform float quirks.  Normal deviates use the Marsaglia
polar method; both the algorithm and the draw order are part of the
reproducibility contract and must not be changed casually.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_MULTIPLIER = 6364136223846793005


class Pcg32:
    """One PCG32 stream identified by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        self._inc = ((stream_id << 1) | 1) & _MASK64
        # Equivalent to the reference pcg32_srandom_r: step, add seed, step.
        self._state = ((self._inc + seed) * _MULTIPLIER + self._inc) & _MASK64

    def next_uint32(self) -> int:
        old = self._state
        self._state = (old * _MULTIPLIER + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        hi = self.next_uint32() >> 6   # 26 bits
        lo = self.next_uint32() >> 5   # 27 bits
        return ((hi << 27) | lo) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high], inclusive, without modulo bias."""
        if high < low:
            raise ValueError(f"empty integer range [{low}, {high}]")
        span = high - low + 1
        # Rejection sampling on the 32-bit output.
        threshold = (1 << 32) - ((1 << 32) % span)
        while True:
            value = self.next_uint32()
            if value < threshold:
                return low + value % span

    def choice_index(self, n: int) -> int:
        return self.randint(0, n - 1)

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), by partial Fisher-Yates."""
        if k > n:
            raise ValueError(f"cannot sample {k} distinct of {n}")
        pool = list(range(n))
        for i in range(k):
            j = self.randint(i, n - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Marsaglia polar method; the spare deviate is discarded so that
        the number of uint32 draws per call has no hidden state."""
        while True:
            u = 2.0 * self.random() - 1.0
            v = 2.0 * self.random() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                return mean + std * u * math.sqrt(-2.0 * math.log(s) / s)

    def truncated_normal(self, mean: float, std: float, minimum: float = 0.0) -> float:
        """Normal deviate resampled until strictly above ``minimum``."""
        while True:
            value = self.normal(mean, std)
            if value > minimum:
                return value

    def lognormal(self, log_median: float, log_sigma: float) -> float:
        """exp(N(log_median, log_sigma)); median is exp(log_median)."""
        return math.exp(self.normal(log_median, log_sigma))


# Stream ids for the entity categories; grouped so each entity gets its own
# substream (category_base + entity_index) and resizing one category never
# shifts draws in another.
STREAM_ROUTES = 1 << 32
STREAM_BUSES = 2 << 32
STREAM_ONROUTE_SENSORS = 3 << 32
STREAM_OFFROUTE_SENSORS = 4 << 32
STREAM_PEDESTRIANS = 5 << 32


def stream(seed: int, category: int, index: int = 0) -> Pcg32:
    """The RNG stream for one entity of one category under a master seed."""
    return Pcg32(seed, category + index)

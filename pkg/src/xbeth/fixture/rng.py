"""Counter-based SplitMix64 generator.

Output ``i`` (0-based) for seed ``s`` is ``mix(s + (i + 1) * GAMMA mod 2**64)``
with the SplitMix64 finalizer ``mix``.  Only integer arithmetic is used when
deriving values, so a stream is identical on every platform and easy to
reproduce in any language.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class CounterRng:
    def __init__(self, seed: int, counter: int = 0):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self.counter = counter

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.seed + self.counter * GAMMA) & MASK64)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("bound must be positive")
        if n > 1 << 64:
            # compose from several words
            bits = n.bit_length()
            while True:
                v = 0
                for _ in range((bits + 63) // 64):
                    v = (v << 64) | self.next_u64()
                v &= (1 << bits) - 1
                if v < n:
                    return v
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]``."""
        return lo + self.below(hi - lo + 1)

    def chance(self, numerator: int, denominator: int) -> bool:
        return self.below(denominator) < numerator

    def bytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += self.next_u64().to_bytes(8, "little")
        return bytes(out[:n])

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self.below(len(seq))]

    def weighted(self, items: Sequence[T], weights: Sequence[int]) -> T:
        """Pick from ``items`` with non-negative integer ``weights``."""
        total = sum(weights)
        r = self.below(total)
        for item, w in zip(items, weights):
            if r < w:
                return item
            r -= w
        raise AssertionError("unreachable")

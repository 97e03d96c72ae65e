"""Portable seeded random stream for split construction.

Algorithm ``xoshiro256**/splitmix64/v1``:

* seeding: the 64-bit seed is the initial splitmix64 state; the four
  xoshiro256** state words are its first four outputs.
* ``below(n)``: draw 64-bit words ``x`` until ``x < 2**64 - (2**64 % n)``,
  return ``x % n``.
* ``shuffle``: Fisher-Yates from the last index down, swapping ``i`` with
  ``below(i + 1)``.
* ``random()``: ``(next >> 11) * 2**-53``.

Any implementation following these rules reproduces our splits bit for bit.
"""

from __future__ import annotations

from typing import MutableSequence

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
ALGORITHM = "xoshiro256**/splitmix64/v1"


def splitmix64_mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """One step: returns ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    return state, splitmix64_mix(state)


def derive_seed(seed: int, index: int) -> int:
    """Independent per-item seed, stable under reordering of items."""
    return splitmix64_mix((seed + (index + 1) * GOLDEN_GAMMA) & MASK64)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** generator seeded through splitmix64."""

    algorithm = ALGORITHM

    def __init__(self, seed: int) -> None:
        if seed < 0:
            raise ValueError("seed must be an unsigned integer")
        state = seed & MASK64
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        self.s = words

    @classmethod
    def from_state(cls, words: list[int]) -> "Xoshiro256":
        gen = cls.__new__(cls)
        gen.s = [w & MASK64 for w in words]
        return gen

    def next_u64(self) -> int:
        s = self.s
        result = _rotl((s[1] * 5) & MASK64, 7) * 9 & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, seq: MutableSequence) -> None:
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

"""Deterministic random number generation.

All protocol-level randomness (shuffles, endorser draws, key generation in
tests and simulations) flows through SplitMix64 so that runs are reproducible
bit-for-bit across platforms and Python versions.  The stdlib Mersenne twister
is avoided on purpose: its floating point helpers are not guaranteed stable
for our use and its state is awkward to derive hierarchically.

Seed derivation is done by hashing, never by arithmetic on the master seed,
so that derived streams (per candidate, per trial, per chunk) are independent
even for adjacent seeds.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Sequence

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def derive_seed(master: int, *parts: int | bytes | str) -> int:
    """Derive a 64-bit subseed from a master seed and a tag sequence.

    Parts are length-prefixed before hashing so that ("ab", "c") and
    ("a", "bc") derive different seeds.
    """
    h = hashlib.sha256()
    h.update(int(master).to_bytes(16, "big", signed=True))
    for part in parts:
        if isinstance(part, str):
            part = part.encode("utf-8")
        elif isinstance(part, int):
            part = int(part).to_bytes(16, "big", signed=True)
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return int.from_bytes(h.digest()[:8], "big")


class SplitMix64:
    """Small, fast, portable PRNG with a 64-bit state.

    Not cryptographic.  Used only for simulation-level choices; secret keys
    drawn from it are for tests and simulated nodes, never for deployment.
    """

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def getrandbits(self, k: int) -> int:
        out = 0
        filled = 0
        while filled < k:
            out = (out << 64) | self.next_u64()
            filled += 64
        return out >> (filled - k)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        k = n.bit_length()
        while True:
            v = self.getrandbits(k)
            if v < n:
                return v

    def randint(self, a: int, b: int) -> int:
        """Uniform integer in [a, b] inclusive."""
        return a + self.randrange(b - a + 1)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of resolution."""
        return self.getrandbits(53) / 9007199254740992.0

    def random_scalar(self, order: int) -> int:
        """Uniform nonzero scalar in [1, order)."""
        return 1 + self.randrange(order - 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: Sequence, k: int) -> list:
        """k distinct elements, order-stable draw by partial Fisher-Yates."""
        pool = list(items)
        if k > len(pool):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = self.randint(i, len(pool) - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def choice(self, items: Sequence):
        if not items:
            raise ValueError("choice from empty sequence")
        return items[self.randrange(len(items))]

    def spawn(self, *parts: int | bytes | str) -> "SplitMix64":
        """Child generator keyed by (current state, parts); state untouched."""
        return SplitMix64(derive_seed(self._state, *parts))


def shuffled(items: Iterable, seed: int) -> list:
    out = list(items)
    SplitMix64(seed).shuffle(out)
    return out

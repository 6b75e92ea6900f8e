"""Injectable randomness sources.

Schemes never touch ``random`` directly: they draw through a source so
that simulations are reproducible from one seed and audits can replay
exhaustively enumerated draw sequences through the same code path.
"""

from __future__ import annotations

import hashlib
import itertools
import random


class RandomnessError(Exception):
    pass


class SeededSource:
    """Deterministic pseudorandom source with labeled sub-streams.

    ``child(label)`` derives an independent stream by hashing the parent
    seed material with the label, so adding a consumer never shifts the
    draws seen by existing consumers.
    """

    def __init__(self, seed, _material: str | None = None):
        self._material = _material if _material is not None else f"seed:{seed}"
        digest = hashlib.sha256(self._material.encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:16], "little"))

    def child(self, label: str) -> "SeededSource":
        return SeededSource(None, _material=f"{self._material}/{label}")

    def randbelow(self, n: int) -> int:
        if n < 1:
            raise ValueError("randbelow needs n >= 1")
        return self._rng.randrange(n)

    def permutation(self, n: int) -> tuple:
        """Uniform permutation of range(n), as a tuple."""
        items = list(range(n))
        self._rng.shuffle(items)
        return tuple(items)

    def sample_indices(self, n: int, k: int) -> tuple:
        """Uniform k-subset of range(n), ascending."""
        return tuple(sorted(self._rng.sample(range(n), k)))


class FixedSource:
    """Replays a predetermined sequence of draws; used by audits.

    Each ``randbelow(n)`` pops the next value and checks it is < n, so
    that enumerating all value tuples of a known draw profile covers the
    full randomness space of the consumer.
    """

    def __init__(self, values):
        self._values = list(values)
        self._pos = 0

    def randbelow(self, n: int) -> int:
        if self._pos >= len(self._values):
            raise RandomnessError("fixed source exhausted")
        v = self._values[self._pos]
        self._pos += 1
        if not 0 <= v < n:
            raise RandomnessError(f"replayed value {v} out of range for randbelow({n})")
        return v

    def permutation(self, n: int) -> tuple:
        raise RandomnessError("fixed source provides scalars only")

    @property
    def exhausted(self) -> bool:
        return self._pos >= len(self._values)


def exhaustive_sources(alphabet_size: int, draws: int):
    """All FixedSource instances for ``draws`` draws below ``alphabet_size``.

    Enumerating these and running a consumer once per source walks its
    entire randomness space.
    """
    for values in itertools.product(range(alphabet_size), repeat=draws):
        yield FixedSource(values)

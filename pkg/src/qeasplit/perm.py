"""Finite permutations of coordinates and the groups G_n they form."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class Permutation:
    """A permutation of the naturals moving only finitely many points.

    ``mapping[k]`` is the image of ``k``; every ``k >= len(mapping)`` is fixed.
    The mapping is stored with trailing fixed points trimmed, so two
    permutations compare equal regardless of the size they were declared on.
    """

    mapping: tuple[int, ...] = ()

    def __post_init__(self):
        m = tuple(int(v) for v in self.mapping)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"not a bijection on {{0..{len(m) - 1}}}: {m}")
        while m and m[-1] == len(m) - 1:
            m = m[:-1]
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls) -> Permutation:
        return cls(())

    @classmethod
    def transposition(cls, i: int, j: int) -> Permutation:
        size = max(i, j) + 1
        m = list(range(size))
        m[i], m[j] = m[j], m[i]
        return cls(tuple(m))

    @classmethod
    def from_transpositions(cls, pairs) -> Permutation:
        """Compose ``[i0,j0][i1,j1]...`` as functions, leftmost applied last."""
        result = cls.identity()
        for i, j in pairs:
            result = result @ cls.transposition(i, j)
        return result

    @property
    def size(self) -> int:
        return len(self.mapping)

    def __call__(self, k: int) -> int:
        return self.mapping[k] if k < len(self.mapping) else k

    def __matmul__(self, other: Permutation) -> Permutation:
        # (self @ other)(k) == self(other(k))
        size = max(self.size, other.size)
        return Permutation(tuple(self(other(k)) for k in range(size)))

    def inverse(self) -> Permutation:
        inv = [0] * self.size
        for k, v in enumerate(self.mapping):
            inv[v] = k
        return Permutation(tuple(inv))

    def on(self, d: int) -> tuple[int, ...]:
        """The mapping written out on ``{0..d-1}``."""
        if self.size > d:
            raise ValueError(f"{self} moves coordinates beyond dimension {d}")
        return tuple(self(k) for k in range(d))

    def fixes_from(self, n: int) -> bool:
        """True iff this permutation lies in G_n (fixes every coordinate >= n)."""
        return self.size <= n

    def is_identity(self) -> bool:
        return self.size == 0

    def transpositions(self) -> list[tuple[int, int]]:
        """A canonical factorisation into transpositions (empty for identity)."""
        pairs = []
        current = list(range(self.size))
        target = list(self.mapping)
        # selection sort on positions; records swaps p with current @ swaps == self
        for k in range(self.size):
            if current[k] != target[k]:
                t = current.index(target[k])
                current[k], current[t] = current[t], current[k]
                pairs.append((k, t))
        return pairs

    def __repr__(self) -> str:
        return f"Permutation({self.mapping})"

    def __lt__(self, other: Permutation) -> bool:
        return self.mapping < other.mapping


@lru_cache(maxsize=None)
def symmetric_group(n: int) -> tuple[Permutation, ...]:
    """All of G_n, in lexicographic order of the mapping (identity first)."""
    return tuple(Permutation(p) for p in itertools.permutations(range(n)))

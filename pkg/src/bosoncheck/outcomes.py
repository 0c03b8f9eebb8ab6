"""Experimental outcomes S = (s_1, ..., s_m) and the spaces they live in.

An outcome is a tuple of ``m`` nonnegative photon counts summing to ``n``.
``OutcomeSpace(m, n)`` is the full space of such lists; with
``collision_free=True`` it is the subset where every count is 0 or 1.

Canonical order is lexicographic *descending* on occupation vectors, so the
first outcome piles photons into the low-index modes: ``(1, 1, 0, 0)`` comes
before ``(0, 0, 1, 1)``. This is the same as ascending lexicographic order on
the sorted tuple of occupied mode indices, which is what ``itertools``
produces, and ranks are computed with the combinatorial number system.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ResourceLimitError

__all__ = [
    "Outcome",
    "OutcomeSpace",
    "MAX_ENUMERATION",
    "as_outcome",
    "is_collision_free",
    "multiplicity_factorial",
    "modes_of",
    "occupations_from_modes",
    "modes_from_occupations",
]

Outcome = tuple[int, ...]

MAX_ENUMERATION = 10**7


def as_outcome(S: Sequence[int]) -> Outcome:
    out = tuple(int(s) for s in S)
    if any(s < 0 for s in out):
        raise ValueError(f"occupations must be nonnegative: {out}")
    return out


def is_collision_free(S: Sequence[int]) -> bool:
    return all(s in (0, 1) for s in S)


def multiplicity_factorial(S: Sequence[int]) -> int:
    """s_1! s_2! ... s_m!"""
    return math.prod(math.factorial(int(s)) for s in S)


def modes_of(S: Sequence[int]) -> tuple[int, ...]:
    """Sorted mode labels, mode i repeated s_i times: (0, 2, 0) -> (1, 1)."""
    return tuple(i for i, s in enumerate(S) for _ in range(int(s)))


def occupations_from_modes(modes, m: int) -> np.ndarray:
    """(k, n) array of mode labels -> (k, m) occupation counts."""
    modes = np.asarray(modes, dtype=np.int64)
    k = modes.shape[0]
    occ = np.zeros((k, m), dtype=np.int32)
    if modes.size:
        np.add.at(occ, (np.repeat(np.arange(k), modes.shape[1]), modes.ravel()), 1)
    return occ


def modes_from_occupations(occ) -> np.ndarray:
    """(k, m) occupations with a common photon number n -> sorted (k, n) mode labels."""
    occ = np.asarray(occ, dtype=np.int64)
    k, m = occ.shape
    totals = occ.sum(axis=1)
    if k == 0:
        return np.zeros((0, 0), dtype=np.int64)
    n = int(totals[0])
    if np.any(totals != n):
        raise ValueError("outcomes have differing photon numbers")
    labels = np.repeat(np.tile(np.arange(m), k), occ.ravel())
    return labels.reshape(k, n)


@dataclass(frozen=True)
class OutcomeSpace:
    """Phi_{m,n} (all outcomes) or, with ``collision_free``, Lambda_{m,n}."""

    m: int
    n: int
    collision_free: bool = False

    def __post_init__(self):
        if self.m < 1 or self.n < 0:
            raise ValueError(f"need m >= 1 and n >= 0, got m={self.m}, n={self.n}")

    @property
    def kind(self) -> str:
        return "collision-free" if self.collision_free else "full"

    @property
    def size(self) -> int:
        if self.collision_free:
            return math.comb(self.m, self.n)
        return math.comb(self.m + self.n - 1, self.n)

    # Both spaces reduce to n-subsets of a ground set: Lambda uses [m] directly,
    # Phi maps a sorted multiset c_0 <= ... <= c_{n-1} to the set {c_i + i}.
    @property
    def _ground(self) -> int:
        return self.m if self.collision_free else self.m + self.n - 1

    def contains(self, S: Sequence[int]) -> bool:
        S = tuple(S)
        return (
            len(S) == self.m
            and all(isinstance(s, (int, np.integer)) and s >= 0 for s in S)
            and sum(S) == self.n
            and (not self.collision_free or is_collision_free(S))
        )

    def _check(self, S: Sequence[int]) -> Outcome:
        S = as_outcome(S)
        if len(S) != self.m or sum(S) != self.n:
            raise ValueError(f"outcome {S} is not in the space (m={self.m}, n={self.n})")
        if self.collision_free and not is_collision_free(S):
            raise ValueError(f"outcome {S} has collisions but the space is collision-free")
        return S

    def _guard(self) -> None:
        if self.size > MAX_ENUMERATION:
            raise ResourceLimitError(
                f"outcome space (m={self.m}, n={self.n}, {self.kind}) has {self.size} "
                f"outcomes, above the enumeration cap {MAX_ENUMERATION}"
            )

    def mode_tuples(self) -> Iterator[tuple[int, ...]]:
        if self.collision_free:
            return itertools.combinations(range(self.m), self.n)
        return itertools.combinations_with_replacement(range(self.m), self.n)

    def enumerate(self) -> list[Outcome]:
        """All outcomes in canonical order."""
        self._guard()
        out = []
        for modes in self.mode_tuples():
            occ = [0] * self.m
            for i in modes:
                occ[i] += 1
            out.append(tuple(occ))
        return out

    def mode_array(self) -> np.ndarray:
        """All outcomes as a (size, n) array of sorted mode labels, canonical order."""
        self._guard()
        if self.n == 0:
            return np.zeros((1, 0), dtype=np.int64)
        flat = np.fromiter(
            itertools.chain.from_iterable(self.mode_tuples()),
            dtype=np.int64,
            count=self.size * self.n,
        )
        return flat.reshape(self.size, self.n)

    def rank(self, S: Sequence[int]) -> int:
        S = self._check(S)
        modes = modes_of(S)
        subset = modes if self.collision_free else tuple(c + i for i, c in enumerate(modes))
        return _subset_rank(subset, self._ground)

    def unrank(self, index: int) -> Outcome:
        index = int(index)
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} out of range for space of size {self.size}")
        subset = _subset_unrank(index, self._ground, self.n)
        modes = subset if self.collision_free else [c - i for i, c in enumerate(subset)]
        occ = [0] * self.m
        for c in modes:
            occ[c] += 1
        return tuple(occ)

    def unrank_modes(self, index: int) -> tuple[int, ...]:
        return modes_of(self.unrank(index))


def _subset_rank(subset: Sequence[int], ground: int) -> int:
    """Lexicographic rank of a sorted k-subset of range(ground)."""
    k = len(subset)
    colex = sum(math.comb(ground - 1 - c, k - i) for i, c in enumerate(subset))
    return math.comb(ground, k) - 1 - colex


def _subset_unrank(index: int, ground: int, k: int) -> list[int]:
    remaining = math.comb(ground, k) - 1 - index
    out = []
    hi = ground - 1
    for i in range(k):
        r = k - i
        # largest d in [r-1, hi] with comb(d, r) <= remaining
        lo, top = r - 1, hi
        while lo < top:
            mid = (lo + top + 1) // 2
            if math.comb(mid, r) <= remaining:
                lo = mid
            else:
                top = mid - 1
        remaining -= math.comb(lo, r)
        out.append(ground - 1 - lo)
        hi = lo - 1
    return out

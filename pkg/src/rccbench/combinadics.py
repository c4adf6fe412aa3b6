"""Lexicographic rank/unrank of M-subsets of {0..K-1} (combinatorial number system).

Ranks are 0-based: rank 0 is the subset {0, 1, ..., M-1} and rank C(K,M)-1 is
{K-M, ..., K-1}.  Ranks are serialized big-endian (most significant bit first),
zero-padded to exactly ``ceil(log2 C(K,M))`` bits; that width is what
:func:`subset_index_bits` reports.  All arithmetic is exact Python integers, so
K up to 2**20 and ranks of ~1000 bits are fine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class InvalidIndexError(ValueError):
    """A subset index value is >= C(K, M) and decodes to no subset."""


def binomial(k: int, m: int) -> int:
    """Exact C(k, m); raises ValueError for m > k or negative arguments."""
    if k < 0 or m < 0:
        raise ValueError(f"binomial arguments must be non-negative, got ({k}, {m})")
    if m > k:
        raise ValueError(f"binomial requires m <= k, got ({k}, {m})")
    return math.comb(k, m)


def subset_index_bits(k: int, m: int) -> int:
    """Bit width of a subset index: ceil(log2 C(k, m)), 0 when C(k, m) == 1."""
    return (binomial(k, m) - 1).bit_length()


@dataclass(frozen=True)
class SubsetIndex:
    """A (possibly invalid) position in the lexicographic order of M-subsets."""

    value: int
    k: int
    m: int

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("subset index value must be non-negative")
        if not 0 <= self.m <= self.k:
            raise ValueError(f"need 0 <= M <= K, got M={self.m}, K={self.k}")

    @property
    def bit_width(self) -> int:
        return subset_index_bits(self.k, self.m)

    @property
    def valid(self) -> bool:
        return self.value < binomial(self.k, self.m)


def rank_combination(indices, k: int) -> SubsetIndex:
    """Rank a strictly increasing sequence of element indices < k.

    Counts, for each slot, the subsets whose slot element is smaller; binomials
    for the scan are updated incrementally via C(n-1, m) = C(n, m)*(n-m)/n.
    """
    elems = list(indices)
    m = len(elems)
    if any(e != int(e) for e in elems):
        raise ValueError("subset elements must be integers")
    if any(not 0 <= e < k for e in elems):
        raise ValueError(f"subset elements must lie in [0, {k})")
    if any(a >= b for a, b in zip(elems, elems[1:])):
        raise ValueError("subset elements must be strictly increasing")

    value = 0
    prev = -1
    for slot, elem in enumerate(elems):
        remaining = m - 1 - slot  # elements still to place after this slot
        n = k - 1 - (prev + 1)
        cnt = math.comb(n, remaining)
        for _ in range(prev + 1, elem):
            value += cnt
            cnt = cnt * (n - remaining) // n
            n -= 1
        prev = elem
    return SubsetIndex(value=value, k=k, m=m)


def unrank_combination(index: SubsetIndex) -> tuple[int, ...]:
    """Invert :func:`rank_combination`; raises InvalidIndexError past C(K, M)."""
    k, m = index.k, index.m
    total = binomial(k, m)
    if index.value >= total:
        raise InvalidIndexError(
            f"subset index {index.value} >= C({k},{m}) = {total}"
        )
    value = index.value
    elems = []
    cand = 0
    for slot in range(m):
        remaining = m - 1 - slot
        n = k - 1 - cand
        cnt = math.comb(n, remaining)
        # greedy: advance the slot element while a full block of subsets fits
        while value >= cnt:
            value -= cnt
            cnt = cnt * (n - remaining) // n
            n -= 1
            cand += 1
        elems.append(cand)
        cand += 1
    return tuple(elems)

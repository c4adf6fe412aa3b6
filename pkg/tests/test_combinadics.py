import math
from itertools import combinations

import pytest

from rccbench.combinadics import (
    InvalidIndexError,
    SubsetIndex,
    binomial,
    rank_combination,
    subset_index_bits,
    unrank_combination,
)


def test_binomial_against_enumeration():
    # independent oracle: count subsets directly
    assert binomial(8, 3) == sum(1 for _ in combinations(range(8), 3))
    assert binomial(8, 3) == 56


@pytest.mark.parametrize("k", [0, 1, 5, 100, 16384])
def test_binomial_empty_subset(k):
    assert binomial(k, 0) == 1


def test_binomial_invalid():
    with pytest.raises(ValueError):
        binomial(3, 4)
    with pytest.raises(ValueError):
        binomial(-1, 0)


def test_binomial_big_integer_case():
    # oracle: explicit falling-factorial product over exact integers
    k, m = 16384, 114
    num = 1
    for i in range(m):
        num *= k - i
    expected = num // math.factorial(m)
    got = binomial(k, m)
    assert got == expected
    # width oracle: find w with 2^(w-1) < C <= 2^w by integer comparison
    w = subset_index_bits(k, m)
    assert (1 << (w - 1)) < got <= (1 << w)


def test_rank_worked_example():
    assert rank_combination((0, 1, 2), 8).value == 0
    assert rank_combination((1, 4, 7), 8).value == 32
    assert rank_combination((5, 6, 7), 8).value == binomial(8, 3) - 1
    assert subset_index_bits(8, 3) == 6


def test_unrank_worked_example():
    assert unrank_combination(SubsetIndex(0, 8, 3)) == (0, 1, 2)
    assert unrank_combination(SubsetIndex(32, 8, 3)) == (1, 4, 7)
    with pytest.raises(InvalidIndexError):
        unrank_combination(SubsetIndex(56, 8, 3))


def test_flip_amplification_witness():
    # flipping the MSB of the 6-bit rank 0 lands on 32 = {1,4,7}, which shares
    # only the element 1 with {0,1,2}: one flipped bit rewrote the whole subset
    width = subset_index_bits(8, 3)
    flipped = 0 ^ (1 << (width - 1))
    assert flipped == 32
    decoded = unrank_combination(SubsetIndex(flipped, 8, 3))
    assert set(decoded) & {0, 1, 2} == {1}


def test_rank_input_validation():
    with pytest.raises(ValueError):
        rank_combination((2, 1), 8)  # not increasing
    with pytest.raises(ValueError):
        rank_combination((1, 1, 3), 8)  # duplicate
    with pytest.raises(ValueError):
        rank_combination((0, 9), 8)  # out of range
    with pytest.raises(ValueError):
        rank_combination((-1, 2), 8)


def test_bijection_exhaustive_small():
    # itertools.combinations enumerates in lexicographic order, which makes it
    # a direct oracle for both directions at once
    for k in range(1, 13):
        for m in range(0, k + 1):
            for pos, subset in enumerate(combinations(range(k), m)):
                assert rank_combination(subset, k).value == pos
                assert unrank_combination(SubsetIndex(pos, k, m)) == subset


def test_rank_monotone_in_lexicographic_order():
    k, m = 10, 4
    subsets = list(combinations(range(k), m))
    ranks = [rank_combination(s, k).value for s in subsets]
    assert ranks == sorted(ranks)
    assert ranks == list(range(len(subsets)))


def test_bit_width_edge_cases():
    assert subset_index_bits(5, 0) == 0  # single subset, zero bits
    assert subset_index_bits(5, 5) == 0
    assert subset_index_bits(2, 1) == 1
    # C(16384, 114) needs ~991 bits; sanity floor only
    assert subset_index_bits(16384, 114) > 900


def test_validity_flag():
    assert SubsetIndex(55, 8, 3).valid
    assert not SubsetIndex(56, 8, 3).valid
    assert not SubsetIndex(63, 8, 3).valid  # representable in 6 bits, invalid

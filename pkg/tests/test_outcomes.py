import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bosoncheck.errors import ResourceLimitError
from bosoncheck.outcomes import (
    OutcomeSpace,
    is_collision_free,
    modes_from_occupations,
    modes_of,
    multiplicity_factorial,
    occupations_from_modes,
)


def brute_force(m, n, collision_free):
    """All occupation vectors, sorted descending lexicographically."""
    top = 1 if collision_free else n
    out = [S for S in itertools.product(range(top + 1), repeat=m) if sum(S) == n]
    return sorted(out, reverse=True)


def test_lambda_4_2():
    out = OutcomeSpace(4, 2, collision_free=True).enumerate()
    assert len(out) == 6
    assert out[0] == (1, 1, 0, 0)
    assert out[-1] == (0, 0, 1, 1)


def test_phi_2_2():
    assert OutcomeSpace(2, 2).enumerate() == [(2, 0), (1, 1), (0, 2)]


def test_phi_20_3_size():
    space = OutcomeSpace(20, 3)
    assert space.size == 1540
    assert len(space.enumerate()) == 1540


@pytest.mark.parametrize("m,n", [(1, 0), (1, 3), (3, 2), (4, 3), (5, 2), (6, 3)])
@pytest.mark.parametrize("cf", [False, True])
def test_enumeration_order_matches_brute_force(m, n, cf):
    if cf and n > m:
        assert OutcomeSpace(m, n, cf).size == 0
        return
    assert OutcomeSpace(m, n, cf).enumerate() == brute_force(m, n, cf)


def test_sizes_match_closed_forms():
    for m in range(1, 13):
        for n in range(0, 6):
            full = OutcomeSpace(m, n)
            assert len(full.enumerate()) == math.comb(m + n - 1, n)
            cf = OutcomeSpace(m, n, True)
            assert len(cf.enumerate()) == math.comb(m, n)


def test_collision_free_fraction():
    for m in range(1, 201):
        for n in range(1, 7):
            ratio = math.comb(m, n) / math.comb(m + n - 1, n)
            assert ratio >= 1 - n * n / m


def test_rank_unrank_round_trip_lambda_6_3():
    space = OutcomeSpace(6, 3, True)
    out = space.enumerate()
    assert len(out) == 20
    for i, S in enumerate(out):
        assert space.rank(S) == i
        assert space.unrank(i) == S


def test_rank_unrank_exhaustive_small():
    for m in range(1, 8):
        for n in range(0, 5):
            for cf in (False, True):
                space = OutcomeSpace(m, n, cf)
                for i, S in enumerate(space.enumerate()):
                    assert space.rank(S) == i and space.unrank(i) == S


def test_first_and_last():
    space = OutcomeSpace(7, 3)
    assert space.rank(space.enumerate()[0]) == 0
    assert space.unrank(space.size - 1) == space.enumerate()[-1]


@given(st.integers(1, 60), st.integers(0, 6), st.data())
def test_rank_unrank_property_large(m, n, data):
    space = OutcomeSpace(m, n)
    i = data.draw(st.integers(0, space.size - 1))
    S = space.unrank(i)
    assert sum(S) == n and len(S) == m
    assert space.rank(S) == i


@given(st.lists(st.integers(0, 3), min_size=1, max_size=10))
def test_rank_is_monotone_in_descending_lex_order(S):
    S = tuple(S)
    space = OutcomeSpace(len(S), sum(S))
    if space.size > 1:
        i = space.rank(S)
        if i + 1 < space.size:
            assert space.unrank(i + 1) < S


def test_rank_rejects_collisions_in_lambda():
    with pytest.raises(ValueError):
        OutcomeSpace(3, 2, True).rank((2, 0, 0))
    with pytest.raises(ValueError):
        OutcomeSpace(3, 2).rank((1, 0, 0))
    with pytest.raises(ValueError):
        OutcomeSpace(3, 2).unrank(6)


def test_enumeration_guard_reports_size():
    space = OutcomeSpace(200, 5)
    with pytest.raises(ResourceLimitError, match=str(space.size)):
        space.enumerate()


def test_zero_photons():
    space = OutcomeSpace(3, 0)
    assert space.enumerate() == [(0, 0, 0)]
    assert space.mode_array().shape == (1, 0)


def test_mode_array_matches_enumerate():
    space = OutcomeSpace(5, 3)
    arr = space.mode_array()
    assert [modes_of(S) for S in space.enumerate()] == [tuple(r) for r in arr]


def test_is_collision_free():
    assert is_collision_free((1, 1, 0))
    assert not is_collision_free((2, 0, 0))
    assert is_collision_free((0, 0, 0))


def test_multiplicity_factorial():
    assert multiplicity_factorial((1, 0, 1, 1)) == 1
    assert multiplicity_factorial((3, 1, 0)) == 6
    assert multiplicity_factorial((2, 2, 0)) == 4


def test_occupation_mode_conversions():
    modes = np.array([[0, 0, 2], [1, 2, 3]])
    occ = occupations_from_modes(modes, 4)
    assert occ.tolist() == [[2, 0, 1, 0], [0, 1, 1, 1]]
    assert modes_from_occupations(occ).tolist() == modes.tolist()
    with pytest.raises(ValueError):
        modes_from_occupations([[1, 0], [1, 1]])


def test_contains():
    space = OutcomeSpace(3, 2, True)
    assert space.contains((1, 0, 1))
    assert not space.contains((2, 0, 0))
    assert not space.contains((1, 0))

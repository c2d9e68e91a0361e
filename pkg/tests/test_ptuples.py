import math
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from ppsh.ptuples import (
    enumerate_tuples,
    tuple_rank,
    tuple_relation,
    tuple_unrank,
)


def test_enumeration_n4_p2_matches_lexicographic_listing():
    table = enumerate_tuples(4, 2)
    assert table.tuples == ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))


def test_single_tuple_case():
    assert enumerate_tuples(3, 3).tuples == ((1, 2, 3),)


def test_counts_and_membership_against_bruteforce():
    for n in range(1, 9):
        for p in range(1, n + 1):
            table = enumerate_tuples(n, p)
            brute = list(combinations(range(1, n + 1), p))
            assert list(table.tuples) == brute
            assert table.size == math.comb(n, p)
            for k in range(1, n + 1):
                ranks = table.membership[k - 1]
                assert len(ranks) == math.comb(n - 1, p - 1)
                assert all(k in table.tuples[r] for r in ranks)


def test_n5_p2_each_index_in_four_tuples():
    table = enumerate_tuples(5, 2)
    assert table.size == 10
    assert all(len(m) == 4 for m in table.membership)


def test_rejects_bad_sizes():
    with pytest.raises(ValueError):
        enumerate_tuples(4, 0)
    with pytest.raises(ValueError):
        enumerate_tuples(4, 5)
    with pytest.raises(ValueError):
        enumerate_tuples(13, 2)


def test_rank_unrank_examples():
    table = enumerate_tuples(4, 2)
    assert tuple_rank((1, 2), table) == 0
    assert tuple_unrank(5, table) == (3, 4)
    with pytest.raises(ValueError):
        tuple_unrank(6, table)
    with pytest.raises(ValueError):
        tuple_rank((2, 1), table)


def test_rank_unrank_roundtrip_exhaustive():
    for n in range(1, 9):
        for p in range(1, n + 1):
            table = enumerate_tuples(n, p)
            for r in range(table.size):
                assert tuple_rank(tuple_unrank(r, table), table) == r


@given(st.integers(min_value=1, max_value=8), st.data())
def test_rank_respects_lexicographic_order(n, data):
    p = data.draw(st.integers(min_value=1, max_value=n))
    table = enumerate_tuples(n, p)
    r1 = data.draw(st.integers(min_value=0, max_value=table.size - 1))
    r2 = data.draw(st.integers(min_value=0, max_value=table.size - 1))
    t1, t2 = tuple_unrank(r1, table), tuple_unrank(r2, table)
    assert (r1 < r2) == (t1 < t2)


def test_relation_examples():
    rel = tuple_relation((1, 2), (2, 3))
    assert (rel.kind, rel.q, rel.r, rel.sign) == ("adjacent", 1, 3, -1)
    rel = tuple_relation((1, 2), (1, 3))
    assert (rel.kind, rel.q, rel.r, rel.sign) == ("adjacent", 2, 3, 1)
    assert tuple_relation((1, 2), (3, 4)).kind == "disjointish"
    assert tuple_relation((1, 2), (1, 2)).kind == "equal"


def test_relation_symmetric_in_sign_exhaustive():
    for n in range(2, 7):
        for p in range(1, n + 1):
            table = enumerate_tuples(n, p)
            for a in table.tuples:
                for b in table.tuples:
                    ra = tuple_relation(a, b)
                    rb = tuple_relation(b, a)
                    assert ra.kind == rb.kind
                    if ra.kind == "adjacent":
                        assert (ra.q, ra.r) == (rb.r, rb.q)
                        assert ra.sign == rb.sign


def test_relation_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        tuple_relation((1, 2), (1, 2, 3))

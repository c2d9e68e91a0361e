"""Increasing p-tuples of {1..n}: enumeration, ranking, adjacency.

Tuples are 1-based (matching the usual index conventions for eigenvalues),
ranks are 0-based lexicographic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

# C(12,6) = 924 keeps the wedge-basis matrices dense-feasible.
MAX_N = 12


@dataclass(frozen=True)
class TupleRelation:
    """How two equal-length increasing tuples overlap.

    kind is "equal", "adjacent" (intersection has p-1 elements) or
    "disjointish".  For adjacent pairs, q is the index only in the first
    tuple, r the index only in the second, and sign = (-1)^(pos(q)+pos(r))
    with 1-based positions inside their tuples.
    """

    kind: str
    q: int | None = None
    r: int | None = None
    sign: int | None = None


@dataclass(frozen=True)
class TupleTable:
    """All C(n,p) increasing p-tuples of {1..n} in lexicographic order."""

    n: int
    p: int
    tuples: tuple
    rank_of: dict
    membership: tuple  # membership[k-1] = ranks of tuples containing k

    @property
    def size(self) -> int:
        return len(self.tuples)

    @property
    def index_array(self) -> np.ndarray:
        """(size, p) array of 0-based member indices; read-only."""
        return self._index_array

    def __repr__(self):  # the dict field makes the default repr unwieldy
        return f"TupleTable(n={self.n}, p={self.p}, size={self.size})"


@lru_cache(maxsize=None)
def enumerate_tuples(n: int, p: int) -> TupleTable:
    """Enumerate all increasing p-tuples of {1..n} in lexicographic order."""
    if not isinstance(n, int) or not isinstance(p, int):
        raise TypeError("n and p must be integers")
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if p > n:
        raise ValueError(f"p must not exceed n, got p={p} > n={n}")
    if n > MAX_N:
        raise ValueError(f"n={n} exceeds the size cap {MAX_N}")
    tuples = tuple(combinations(range(1, n + 1), p))
    rank_of = {t: r for r, t in enumerate(tuples)}
    membership = tuple(
        tuple(r for r, t in enumerate(tuples) if k in t) for k in range(1, n + 1)
    )
    table = TupleTable(n=n, p=p, tuples=tuples, rank_of=rank_of, membership=membership)
    idx = np.array(tuples, dtype=np.intp) - 1
    idx.flags.writeable = False
    object.__setattr__(table, "_index_array", idx)
    assert table.size == math.comb(n, p)
    return table


def tuple_rank(t, table: TupleTable) -> int:
    """Lexicographic 0-based rank of a tuple in its table."""
    r = table.rank_of.get(tuple(t))
    if r is None:
        raise ValueError(f"{tuple(t)!r} is not an increasing {table.p}-tuple of 1..{table.n}")
    return r


def tuple_unrank(r: int, table: TupleTable):
    """Tuple at 0-based lexicographic rank r."""
    if not 0 <= r < table.size:
        raise ValueError(f"rank {r} out of range [0, {table.size})")
    return table.tuples[r]


def tuple_relation(a, b) -> TupleRelation:
    """Classify the overlap of two increasing tuples of equal length."""
    a = tuple(a)
    b = tuple(b)
    if len(a) != len(b):
        raise ValueError(f"tuple lengths differ: {len(a)} vs {len(b)}")
    if a == b:
        return TupleRelation("equal")
    common = set(a) & set(b)
    if len(common) != len(a) - 1:
        return TupleRelation("disjointish")
    q = next(iter(set(a) - common))
    r = next(iter(set(b) - common))
    # 1-based positions; parity is unchanged by the +2 shift from 0-based.
    sign = -1 if (a.index(q) + b.index(r)) % 2 else 1
    return TupleRelation("adjacent", q=q, r=r, sign=sign)

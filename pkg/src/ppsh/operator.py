"""The eigenvalue p-sum product operator, evaluated by two independent routes.

Route one: eigendecompose A and multiply the sums lambda_{i1}+...+lambda_{ip}
over all increasing p-tuples.  Route two: assemble the induced symmetric
endomorphism of the p-th exterior power (linear in A) and take its
determinant.  The two must agree; keeping both catches indexing and sign
mistakes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConeViolationError
from .ptuples import MAX_N, TupleTable, enumerate_tuples, tuple_relation

# Relative tolerance band separating the open cone, its boundary and the
# outside; scaled by 1 + max|entry| of the matrix at hand.
CONE_RTOL = 1e-10


@dataclass(frozen=True)
class SymMatrix:
    """Dense real symmetric matrix; exact symmetry enforced on construction."""

    a: np.ndarray

    def __post_init__(self):
        arr = np.array(self.a, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("matrix must be at least 1x1")
        if not np.isfinite(arr).all():
            raise ValueError("matrix entries must be finite")
        if not np.array_equal(arr, arr.T):
            raise ValueError("matrix is not exactly symmetric")
        arr.flags.writeable = False
        object.__setattr__(self, "a", arr)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def scale(self) -> float:
        """Tolerance scale 1 + max|a_kl|."""
        return 1.0 + float(np.abs(self.a).max())

    @classmethod
    def diag(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls(np.eye(n))

    @classmethod
    def symmetrized(cls, arr) -> "SymMatrix":
        """Build from an arbitrary square array by exact averaging with its transpose."""
        arr = np.asarray(arr, dtype=float)
        return cls((arr + arr.T) / 2.0)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in decreasing order plus an orthonormal eigenvector frame."""

    values: np.ndarray  # (n,), decreasing
    frame: np.ndarray   # (n, n), columns are eigenvectors

    def reconstruct(self) -> np.ndarray:
        return (self.frame * self.values) @ self.frame.T


def eigen_spectrum(A: SymMatrix) -> Spectrum:
    """Symmetric eigendecomposition with eigenvalues sorted decreasing."""
    w, v = np.linalg.eigh(A.a)
    values = np.ascontiguousarray(w[::-1])
    frame = np.ascontiguousarray(v[:, ::-1])
    values.flags.writeable = False
    frame.flags.writeable = False
    return Spectrum(values=values, frame=frame)


@dataclass(frozen=True)
class OperatorValue:
    """Raw product value and, when defined, its C(n,p)-th root."""

    mp: float
    tilde: float | None


def mp_from_eigenvalues(values, p: int):
    """Product of all p-tuple sums of the trailing axis; broadcasts over leading axes."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    idx = enumerate_tuples(n, p).index_array
    sums = values[..., idx].sum(axis=-1)
    return sums.prod(axis=-1)


def mp_from_spectrum(s: Spectrum, p: int) -> OperatorValue:
    """Evaluate the operator from a spectrum via the direct product formula."""
    n = s.values.shape[0]
    mp = float(mp_from_eigenvalues(s.values, p))
    m = math.comb(n, p)
    tilde = mp ** (1.0 / m) if mp >= 0 else None
    return OperatorValue(mp=mp, tilde=tilde)


@dataclass(frozen=True)
class DerivationMatrix:
    """Matrix of the induced endomorphism of the p-th wedge power of R^n.

    Basis vectors are indexed by increasing p-tuples in lexicographic order.
    Diagonal entry at tuple alpha is the sum of the source's diagonal over
    alpha; the (alpha, beta) entry is sign * a_qr when the tuples differ in a
    single index (q only in alpha, r only in beta), and zero otherwise.  The
    matrix is linear in the source and its determinant equals the operator.
    """

    n: int
    p: int
    d: np.ndarray
    table: TupleTable

    @property
    def dim(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True)
class _DerivationPlan:
    """Precomputed index maps assembling derivation matrices and gradients."""

    n: int
    p: int
    size: int
    member: np.ndarray        # (N, n) 0/1 tuple membership
    rows: np.ndarray          # adjacent-pair positions, both orientations
    cols: np.ndarray
    signs: np.ndarray
    ks: np.ndarray            # source entry (k, l): k = beta \ alpha
    ls: np.ndarray            #                      l = alpha \ beta
    grad_scatter: np.ndarray  # (P, n*n), one-hot at k*n + l


@lru_cache(maxsize=None)
def _derivation_plan(n: int, p: int) -> _DerivationPlan:
    table = enumerate_tuples(n, p)
    N = table.size
    member = np.zeros((N, n))
    rows, cols, signs, ks, ls = [], [], [], [], []
    for ra, a in enumerate(table.tuples):
        for i in a:
            member[ra, i - 1] = 1.0
        for rb, b in enumerate(table.tuples):
            if ra == rb:
                continue
            rel = tuple_relation(a, b)
            if rel.kind == "adjacent":
                rows.append(ra)
                cols.append(rb)
                signs.append(float(rel.sign))
                ks.append(rel.r - 1)
                ls.append(rel.q - 1)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    signs = np.asarray(signs, dtype=float)
    ks = np.asarray(ks, dtype=np.intp)
    ls = np.asarray(ls, dtype=np.intp)
    scatter = np.zeros((len(rows), n * n))
    scatter[np.arange(len(rows)), ks * n + ls] = 1.0
    for arr in (member, rows, cols, signs, ks, ls, scatter):
        arr.flags.writeable = False
    return _DerivationPlan(
        n=n, p=p, size=N, member=member, rows=rows, cols=cols, signs=signs,
        ks=ks, ls=ls, grad_scatter=scatter,
    )


def derivation_batch(H, p: int) -> np.ndarray:
    """(K, n, n) stack of symmetric matrices -> (K, N, N) derivation matrices."""
    H = np.asarray(H, dtype=float)
    K, n = H.shape[0], H.shape[-1]
    plan = _derivation_plan(n, p)
    N = plan.size
    D = np.zeros((K, N, N))
    rng = np.arange(n)
    hdiag = H[:, rng, rng]
    D[:, np.arange(N), np.arange(N)] = hdiag @ plan.member.T
    if plan.rows.size:
        D[:, plan.rows, plan.cols] = plan.signs * H[:, plan.ks, plan.ls]
    return D


_SIGN_CONVENTION_CHECKED = False


def _expected_wedge_n3(u: np.ndarray) -> np.ndarray:
    return np.array([
        [u[0, 0] + u[1, 1], u[1, 2], -u[0, 2]],
        [u[1, 2], u[0, 0] + u[2, 2], u[0, 1]],
        [-u[0, 2], u[0, 1], u[1, 1] + u[2, 2]],
    ])


def _expected_wedge_n4(u: np.ndarray) -> np.ndarray:
    z = 0.0
    upper = np.array([
        [u[0, 0] + u[1, 1], u[1, 2], u[1, 3], -u[0, 2], -u[0, 3], z],
        [z, u[0, 0] + u[2, 2], u[2, 3], u[0, 1], z, -u[0, 3]],
        [z, z, u[0, 0] + u[3, 3], z, u[0, 1], u[0, 2]],
        [z, z, z, u[1, 1] + u[2, 2], u[2, 3], -u[1, 3]],
        [z, z, z, z, u[1, 1] + u[3, 3], u[1, 2]],
        [z, z, z, z, z, u[2, 2] + u[3, 3]],
    ])
    return upper + np.triu(upper, 1).T


def _check_sign_convention():
    """One-time self-test of the off-diagonal sign rule against the two
    canonical wedge matrices in dimensions three and four."""
    global _SIGN_CONVENTION_CHECKED
    rng = np.random.default_rng(20240229)
    for n, expected in ((3, _expected_wedge_n3), (4, _expected_wedge_n4)):
        u = rng.normal(size=(n, n))
        u = (u + u.T) / 2.0
        got = derivation_batch(u[None], 2)[0]
        assert np.allclose(got, expected(u), rtol=0, atol=1e-14), (
            "sign convention mismatch against canonical wedge matrices"
        )
    _SIGN_CONVENTION_CHECKED = True


def build_derivation(A: SymMatrix, p: int) -> DerivationMatrix:
    """Assemble the wedge-power derivation matrix of a symmetric matrix."""
    n = A.n
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got p={p}, n={n}")
    if n > MAX_N:
        raise ValueError(f"n={n} exceeds the size cap {MAX_N}")
    if __debug__ and not _SIGN_CONVENTION_CHECKED:
        _check_sign_convention()
    d = derivation_batch(A.a[None], p)[0]
    d.flags.writeable = False
    return DerivationMatrix(n=n, p=p, d=d, table=enumerate_tuples(n, p))


def mp_via_determinant(D: DerivationMatrix) -> float:
    """Operator value as the determinant of the derivation matrix."""
    return float(np.linalg.det(D.d))


def cone_margin_of_values(values_desc, p: int) -> float:
    """Minimum tuple sum: the sum of the p smallest eigenvalues."""
    values_desc = np.asarray(values_desc, dtype=float)
    n = values_desc.shape[-1]
    return float(values_desc[..., n - p:].sum(axis=-1))


def tilde_mp(A: SymMatrix, p: int) -> OperatorValue:
    """Degree-one normalized value mp^(1/C(n,p)); requires the closed cone.

    Raises ConeViolationError carrying the offending tuple when the minimum
    tuple sum drops below -CONE_RTOL * (1 + max|a_kl|).
    """
    s = eigen_spectrum(A)
    n = A.n
    margin = cone_margin_of_values(s.values, p)
    if margin < -CONE_RTOL * A.scale:
        witness = tuple(range(n - p + 1, n + 1))
        raise ConeViolationError(
            f"spectrum outside the closed cone: min tuple sum {margin:.6g} "
            f"attained by positions {witness}",
            margin=margin,
            witness=witness,
        )
    m = math.comb(n, p)
    mp = float(mp_from_eigenvalues(s.values, p))
    tilde = max(mp, 0.0) ** (1.0 / m)
    return OperatorValue(mp=mp, tilde=tilde)

"""Closed-form first and second derivatives of the p-sum product operator.

Matrix entries are treated as n^2 independent coordinates, so for k != l the
entries a_kl and a_lk each carry their own partial derivative; a symmetric
perturbation a_kl = a_lk = t therefore has d^2/dt^2 = 2 * (kl,lk)-entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConeViolationError, DivisionHazardError
from .operator import (
    SymMatrix,
    _derivation_plan,
    cone_margin_of_values,
    derivation_batch,
    CONE_RTOL,
)
from .ptuples import enumerate_tuples

# A tuple sum this small (relative to 1 + max|lambda|) makes the quotient
# formulas numerically meaningless; callers should switch to the adjugate route.
HAZARD_RTOL = 1e-12


@dataclass(frozen=True)
class GradientMatrix:
    """Entrywise gradient d(operator)/d(a_kl) as an n x n symmetric matrix."""

    n: int
    p: int
    entries: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))


@dataclass(frozen=True)
class HessianTensor:
    """Second derivatives at a diagonal point.

    Only two sparsity patterns survive there: (kk, rr) pairs of diagonal
    coordinates, stored in diag_pairs[k-1, r-1], and (kl, lk) pairs of
    transposed off-diagonal coordinates, stored in offdiag[k-1, l-1].
    """

    n: int
    p: int
    diag_pairs: np.ndarray
    offdiag: np.ndarray

    def entry(self, k: int, l: int, r: int, s: int) -> float:
        """Second derivative for coordinates (k,l) and (r,s), 1-based."""
        for i in (k, l, r, s):
            if not 1 <= i <= self.n:
                raise ValueError(f"index {i} out of range 1..{self.n}")
        if k == l and r == s:
            return float(self.diag_pairs[k - 1, r - 1])
        if k != l and r == l and s == k:
            return float(self.offdiag[k - 1, l - 1])
        return 0.0


def _adjugate_sym_batch(D: np.ndarray):
    """Adjugates of a stack of symmetric matrices via eigendecomposition.

    Well-defined at singular matrices: the i-th adjugate eigenvalue is the
    product of all eigenvalues except the i-th.
    """
    w, V = np.linalg.eigh(D)
    K, N = w.shape
    pref = np.ones((K, N + 1))
    np.cumprod(w, axis=1, out=pref[:, 1:])
    suf = np.ones((K, N + 1))
    suf[:, :-1] = np.cumprod(w[:, ::-1], axis=1)[:, ::-1]
    prods = pref[:, :N] * suf[:, 1:]
    adj = np.einsum("kin,kn,kjn->kij", V, prods, V)
    det = pref[:, N]
    return adj, det


def grad_mp_adjugate_batch(H, p: int):
    """Gradients for a stack of symmetric matrices; returns (grads, dets).

    Differentiates det of the derivation matrix, which is linear in the
    source, so the result is exact in every spectrum configuration including
    repeated eigenvalues and the cone boundary.
    """
    H = np.asarray(H, dtype=float)
    K, n = H.shape[0], H.shape[-1]
    plan = _derivation_plan(n, p)
    D = derivation_batch(H, p)
    adj, det = _adjugate_sym_batch(D)
    N = plan.size
    G = np.zeros_like(H)
    rngN = np.arange(N)
    adjdiag = adj[:, rngN, rngN]
    rng = np.arange(n)
    G[:, rng, rng] = adjdiag @ plan.member
    if plan.rows.size:
        vals = plan.signs * adj[:, plan.rows, plan.cols]
        G += (vals @ plan.grad_scatter).reshape(K, n, n)
        # exact symmetry: the two orientations agree analytically but their
        # accumulation orders differ at the last bit
        G += G.transpose(0, 2, 1).copy()
        G *= 0.5
    return G, det


def grad_mp_adjugate(A: SymMatrix, p: int) -> GradientMatrix:
    """Gradient by differentiating the determinant route; valid everywhere."""
    G, _ = grad_mp_adjugate_batch(A.a[None], p)
    g = G[0]
    g.flags.writeable = False
    return GradientMatrix(n=A.n, p=p, entries=g)


def _checked_tuple_sums(lam: np.ndarray, p: int):
    n = lam.size
    table = enumerate_tuples(n, p)
    sums = lam[table.index_array].sum(axis=1)
    scale = 1.0 + float(np.abs(lam).max())
    if np.abs(sums).min() <= HAZARD_RTOL * scale:
        worst = int(np.abs(sums).argmin())
        raise DivisionHazardError(
            f"tuple sum {sums[worst]:.3g} for {table.tuples[worst]} vanishes; "
            "use the adjugate route"
        )
    return table, sums


def _require_nonincreasing(lam: np.ndarray):
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be given in non-increasing order")


def grad_mp_diagonal(lam, p: int) -> GradientMatrix:
    """Gradient at a diagonal matrix with the given decreasing eigenvalues.

    The (k,k) entry is mp * sum over tuples containing k of 1/(tuple sum);
    off-diagonal entries vanish.
    """
    lam = np.asarray(lam, dtype=float)
    _require_nonincreasing(lam)
    table, sums = _checked_tuple_sums(lam, p)
    plan = _derivation_plan(lam.size, p)
    mp = sums.prod()
    diag = mp * ((1.0 / sums) @ plan.member)
    g = np.diag(diag)
    g.flags.writeable = False
    return GradientMatrix(n=lam.size, p=p, entries=g)


def hess_mp_diagonal(lam, p: int) -> HessianTensor:
    """Second derivatives at a diagonal matrix with decreasing eigenvalues.

    (kk, rr): mp * sum over ordered pairs of distinct tuples (alpha owning k,
    beta owning r) of 1/(S_alpha S_beta).  (kl, lk), k != l: -mp * sum over
    tuples alpha owning k but not l, paired with beta = alpha - {k} + {l}.
    """
    lam = np.asarray(lam, dtype=float)
    _require_nonincreasing(lam)
    n = lam.size
    table, sums = _checked_tuple_sums(lam, p)
    plan = _derivation_plan(n, p)
    mp = sums.prod()
    inv = 1.0 / sums
    per_k = inv @ plan.member                       # sum_{alpha owns k} 1/S_alpha
    both = plan.member.T @ (plan.member * (inv ** 2)[:, None])
    diag_pairs = mp * (np.outer(per_k, per_k) - both)

    offdiag = np.zeros((n, n))
    for a_idx, tup in enumerate(table.tuples):
        sa = sums[a_idx]
        members = set(tup)
        for k in tup:
            for l in range(1, n + 1):
                if l in members:
                    continue
                sb = sa - lam[k - 1] + lam[l - 1]
                offdiag[k - 1, l - 1] += 1.0 / (sa * sb)
    offdiag *= -mp
    diag_pairs.flags.writeable = False
    offdiag.flags.writeable = False
    return HessianTensor(n=n, p=p, diag_pairs=diag_pairs, offdiag=offdiag)


def euler_residual(A: SymMatrix, p: int) -> float:
    """Residual of the degree identity: sum_kl grad_kl * a_kl - C(n,p) * mp.

    Zero in exact arithmetic because the operator is homogeneous of degree
    C(n,p) in the matrix entries.
    """
    G, det = grad_mp_adjugate_batch(A.a[None], p)
    m = math.comb(A.n, p)
    return float((G[0] * A.a).sum() - m * det[0])


def grad_tilde_mp(A: SymMatrix, p: int) -> GradientMatrix:
    """Gradient of the degree-one normalization mp^(1/C(n,p)).

    Requires a spectrum strictly inside the cone so the root is smooth.
    """
    w = np.linalg.eigvalsh(A.a)[::-1]
    margin = cone_margin_of_values(w, p)
    if margin <= CONE_RTOL * A.scale:
        raise ConeViolationError(
            f"gradient of the normalized operator needs the open cone; margin {margin:.6g}",
            margin=margin,
            witness=tuple(range(A.n - p + 1, A.n + 1)),
        )
    G, det = grad_mp_adjugate_batch(A.a[None], p)
    m = math.comb(A.n, p)
    mp = float(det[0])
    g = (mp ** (1.0 / m) / (m * mp)) * G[0]
    g.flags.writeable = False
    return GradientMatrix(n=A.n, p=p, entries=g)


def tilde_grad_batch(H, p: int):
    """Normalized value and gradient for a stack of cone-interior matrices.

    Returns (tilde, grads) with tilde of shape (K,) and grads of shape
    (K, n, n).  The caller guarantees every spectrum lies in the open cone;
    non-positive products are clipped to zero value and zero gradient.
    """
    H = np.asarray(H, dtype=float)
    m = math.comb(H.shape[-1], p)
    G, det = grad_mp_adjugate_batch(H, p)
    pos = det > 0.0
    tilde = np.where(pos, np.abs(det), 0.0) ** (1.0 / m)
    coef = np.where(pos, tilde / (m * np.where(pos, det, 1.0)), 0.0)
    return tilde, coef[:, None, None] * G

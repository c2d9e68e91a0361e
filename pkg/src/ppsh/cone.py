"""Membership, margins and samplers for the eigenvalue p-sum positivity cone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SamplerExhaustionError
from .operator import CONE_RTOL, SymMatrix, cone_margin_of_values, mp_from_eigenvalues
from math import comb

STRICT_INTERIOR = "strict-interior"
CLOSURE_BOUNDARY = "closure-boundary"
OUTSIDE = "outside"

# Absolute cap on arrowhead tail entries; requests whose feasible region needs
# larger tails exhaust the sampler instead of silently rescaling.
ARROWHEAD_TAIL_CAP = 1e3

_SAMPLE_CONE_TAG = 101
_SAMPLE_ARROWHEAD_TAG = 102


@dataclass(frozen=True)
class ConeReport:
    """Cone membership verdict with the minimizing tuple as a witness."""

    status: str
    margin: float
    witness: tuple


def cone_report(A: SymMatrix, p: int) -> ConeReport:
    """Classify A against the cone at tolerance CONE_RTOL * (1 + max|a_kl|).

    The minimum tuple sum is attained by the p smallest eigenvalues, so the
    witness is always the tail positions (n-p+1, ..., n) of the decreasing
    ordering.
    """
    w = np.linalg.eigvalsh(A.a)[::-1]
    n = A.n
    margin = cone_margin_of_values(w, p)
    tol = CONE_RTOL * A.scale
    if margin > tol:
        status = STRICT_INTERIOR
    elif margin < -tol:
        status = OUTSIDE
    else:
        status = CLOSURE_BOUNDARY
    return ConeReport(status=status, margin=margin, witness=tuple(range(n - p + 1, n + 1)))


def sample_cone(n: int, p: int, seed: int, scale: float = 1.0) -> SymMatrix:
    """Deterministic cone-interior sample: random symmetric + t * identity.

    The shift t is the smallest multiple of the identity putting the minimum
    tuple sum at or above 0.1 * scale.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[_SAMPLE_CONE_TAG, seed, n, p]))
    b = rng.uniform(-scale, scale, size=(n, n))
    b = (b + b.T) / 2.0
    w = np.linalg.eigvalsh(b)[::-1]
    margin = cone_margin_of_values(w, p)
    t = max(0.0, (0.1 * scale - margin) / p)
    return SymMatrix(b + t * np.eye(n))


@dataclass(frozen=True)
class ArrowheadMatrix:
    """Symmetric matrix whose off-diagonal entries live in row/column one."""

    sym: SymMatrix

    def __post_init__(self):
        a = self.sym.a
        n = a.shape[0]
        body = a[1:, 1:]
        if n > 1 and np.any(body - np.diag(np.diag(body)) != 0.0):
            raise ValueError("off-diagonal entries outside row/column one must vanish")


@dataclass(frozen=True)
class ArrowheadSample:
    """Sampler output: the matrix, its cone margin, and the strength flag."""

    arrowhead: ArrowheadMatrix
    margin: float
    strong: bool


def arrowhead_strong_threshold(A: SymMatrix, p: int) -> float:
    """Quantitative head-entry threshold (2/n) * mp^(1/n) * C(n-1, p).

    A sample with head entry at most -c is "strong" when c exceeds this.
    """
    n = A.n
    w = np.linalg.eigvalsh(A.a)[::-1]
    mp = float(mp_from_eigenvalues(w, p))
    if mp < 0.0:
        raise ValueError("threshold is defined for cone members only")
    return (2.0 / n) * mp ** (1.0 / n) * comb(n - 1, p)


def _float_entropy(x: float) -> int:
    return int(np.float64(x).view(np.uint64))


def sample_arrowhead(n: int, p: int, c: float, seed: int, max_tries: int = 500) -> ArrowheadSample:
    """Rejection-sample an arrowhead cone member with head entry <= -c.

    Tail diagonal entries are drawn just above c/(p-1) so that sums of the p
    smallest eigenvalues stay positive while the product of all tuple sums
    stays small enough for the strong flag to be reachable.  Tails are capped
    at ARROWHEAD_TAIL_CAP; a request needing larger tails (c enormous, or
    p = 1 where no cone member has a negative diagonal entry) exhausts.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got p={p}, n={n}")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=[_SAMPLE_ARROWHEAD_TAG, seed, n, p, _float_entropy(c)])
    )
    denom = max(p - 1, 1)
    lo, hi = 1.02 * c / denom, 1.35 * c / denom
    if lo >= ARROWHEAD_TAIL_CAP:
        lo, hi = 0.98 * ARROWHEAD_TAIL_CAP, ARROWHEAD_TAIL_CAP
    hi = min(hi, ARROWHEAD_TAIL_CAP)
    for _ in range(max_tries):
        head = -c * rng.uniform(1.0, 1.08)
        tail = rng.uniform(lo, hi, size=n - 1)
        coupling = 0.05 * c * rng.uniform(-1.0, 1.0, size=n - 1)
        a = np.zeros((n, n))
        a[0, 0] = head
        if n > 1:
            a[np.arange(1, n), np.arange(1, n)] = tail
            a[0, 1:] = coupling
            a[1:, 0] = coupling
        w = np.linalg.eigvalsh(a)[::-1]
        margin = cone_margin_of_values(w, p)
        if margin <= 0.0:
            continue
        A = SymMatrix(a)
        strong = c > arrowhead_strong_threshold(A, p)
        return ArrowheadSample(arrowhead=ArrowheadMatrix(A), margin=margin, strong=strong)
    raise SamplerExhaustionError(
        f"no arrowhead cone member with head <= -{c:.6g} found in {max_tries} tries",
        params={"n": n, "p": p, "c": c, "seed": seed, "max_tries": max_tries},
    )


def counterexample_matrix(eps: float) -> SymMatrix:
    """The 3x3 positive definite matrix whose smallest diagonal entry owns a
    vanishingly small share of the second symmetric function.

    Its {2,3} principal 2x2 minor equals 2 - eps^2 while the sum of all 2x2
    principal minors grows like 2/eps, so no fixed fraction of that sum is
    dominated by the minor of the smallest diagonal entry.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly between 0 and 1")
    inv = 1.0 / eps
    return SymMatrix(np.array([
        [1.0, eps, eps],
        [eps, inv, inv - eps],
        [eps, inv - eps, inv],
    ]))

"""Exact reduction of the p-sum product to the elementary symmetric basis.

Everything here is exact rational arithmetic over arbitrary-precision
integers; no floating point enters.  Monomial elimination uses the graded
lexicographic order, under which the leading monomial of a symmetric
polynomial has weakly decreasing exponents and maps to a unique monomial in
the elementary symmetric generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from .errors import NonSymmetricPolynomialError


@dataclass(frozen=True)
class LambdaPolynomial:
    """Polynomial in lambda_1..lambda_n with rational coefficients."""

    n: int
    terms: dict  # exponent tuple -> Fraction, no zero coefficients

    def __post_init__(self):
        object.__setattr__(
            self,
            "terms",
            {tuple(e): Fraction(c) for e, c in self.terms.items() if c != 0},
        )

    def evaluate(self, lambdas) -> Fraction:
        lambdas = [Fraction(x) for x in lambdas]
        total = Fraction(0)
        for exps, c in self.terms.items():
            v = c
            for x, e in zip(lambdas, exps):
                if e:
                    v *= x ** e
            total += v
        return total


@dataclass(frozen=True)
class SigmaPolynomial:
    """Polynomial in the elementary symmetric generators sigma_1..sigma_n."""

    n: int
    terms: dict  # exponent tuple over (sigma_1..sigma_n) -> Fraction

    def __post_init__(self):
        object.__setattr__(
            self,
            "terms",
            {tuple(e): Fraction(c) for e, c in self.terms.items() if c != 0},
        )

    def weighted_degrees(self) -> set:
        """Set of weighted degrees sum(k * e_k) over the stored terms."""
        return {sum((k + 1) * e for k, e in enumerate(exps)) for exps in self.terms}

    def sorted_terms(self):
        """Terms ordered by weighted degree, then exponent tuple descending."""
        def key(item):
            exps, _ = item
            wdeg = sum((k + 1) * e for k, e in enumerate(exps))
            return (wdeg, tuple(-e for e in exps))
        return sorted(self.terms.items(), key=key)

    def canonical_text(self) -> str:
        """Canonical rendering such as 'σ1·σ2 - σ3'."""
        if not self.terms:
            return "0"
        pieces = []
        for exps, c in self.sorted_terms():
            factors = []
            for k, e in enumerate(exps, start=1):
                if e == 1:
                    factors.append(f"σ{k}")
                elif e > 1:
                    factors.append(f"σ{k}^{e}")
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "·".join(factors)
            else:
                body = str(mag) + "·" + "·".join(factors)
            pieces.append(("-" if c < 0 else "+", body))
        sign0, body0 = pieces[0]
        out = ("-" if sign0 == "-" else "") + body0
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "terms": [
                {
                    "exponents": list(exps),
                    "numerator": c.numerator,
                    "denominator": c.denominator,
                }
                for exps, c in self.sorted_terms()
            ],
        }


# ---------------------------------------------------------------------------
# construction and reduction

_EXPAND_CAP = 6  # term counts explode combinatorially past this


def expand_mp(n: int, p: int) -> LambdaPolynomial:
    """Exact expansion of the product of all p-tuple coordinate sums."""
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got p={p}, n={n}")
    if n > _EXPAND_CAP:
        raise ValueError(f"n={n} exceeds the expansion guard {_EXPAND_CAP}")
    poly = {(0,) * n: Fraction(1)}
    for tup in combinations(range(n), p):
        factor = {}
        for i in tup:
            e = [0] * n
            e[i] = 1
            factor[tuple(e)] = Fraction(1)
        poly = _poly_mul(poly, factor, n)
    return LambdaPolynomial(n=n, terms=poly)


def _poly_mul(a: dict, b: dict, n: int) -> dict:
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            c = out.get(e, Fraction(0)) + ca * cb
            if c:
                out[e] = c
            elif e in out:
                del out[e]
    return out


@lru_cache(maxsize=None)
def _sigma_poly(n: int, k: int) -> tuple:
    """sigma_k in n variables as a tuple of exponent tuples (coefficient 1)."""
    out = []
    for tup in combinations(range(n), k):
        e = [0] * n
        for i in tup:
            e[i] = 1
        out.append(tuple(e))
    return tuple(out)


def _sigma_monomial_expand(n: int, sig_exps) -> dict:
    """Expand a monomial in the sigma generators into lambda variables."""
    poly = {(0,) * n: Fraction(1)}
    for k, e in enumerate(sig_exps, start=1):
        for _ in range(e):
            factor = {exp: Fraction(1) for exp in _sigma_poly(n, k)}
            poly = _poly_mul(poly, factor, n)
    return poly


def _grlex_leading(terms: dict):
    return max(terms, key=lambda e: (sum(e), e))


def _is_symmetric(P: LambdaPolynomial, trials: int = 4) -> bool:
    """Exact spot-check of permutation invariance at deterministic points."""
    import random

    rng = random.Random(987654321)
    pts = []
    for _ in range(trials):
        pts.append([Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for _ in range(P.n)])
    for pt in pts:
        base = P.evaluate(pt)
        for _ in range(3):
            perm = pt[:]
            rng.shuffle(perm)
            if P.evaluate(perm) != base:
                return False
    return True


def reduce_to_sigma(P: LambdaPolynomial) -> SigmaPolynomial:
    """Exact rewrite of a symmetric polynomial in the sigma basis.

    Standard leading-monomial elimination: the grlex leading monomial of a
    symmetric polynomial has weakly decreasing exponents (e_1 >= ... >= e_n)
    and is the leading monomial of
    sigma_1^(e_1-e_2) * sigma_2^(e_2-e_3) * ... * sigma_n^(e_n).
    The result is verified by exact evaluation against the input at fifty
    deterministic rational points.
    """
    n = P.n
    if not _is_symmetric(P):
        raise NonSymmetricPolynomialError("input is not symmetric under permutations")
    work = dict(P.terms)
    out = {}
    while work:
        lead = _grlex_leading(work)
        c = work[lead]
        if any(lead[i] < lead[i + 1] for i in range(n - 1)):
            raise NonSymmetricPolynomialError(
                f"leading monomial {lead} is not weakly decreasing"
            )
        sig = tuple(lead[i] - lead[i + 1] for i in range(n - 1)) + (lead[n - 1],)
        out[sig] = out.get(sig, Fraction(0)) + c
        expansion = _sigma_monomial_expand(n, sig)
        for e, ce in expansion.items():
            nc = work.get(e, Fraction(0)) - c * ce
            if nc:
                work[e] = nc
            elif e in work:
                del work[e]
    result = SigmaPolynomial(n=n, terms=out)
    _verify_reduction(P, result)
    return result


def _verify_reduction(P: LambdaPolynomial, S: SigmaPolynomial, points: int = 50):
    import random

    rng = random.Random(246813579)
    for _ in range(points):
        pt = [Fraction(rng.randint(-20, 20), rng.randint(1, 9)) for _ in range(P.n)]
        assert eval_sigma(S, pt) == P.evaluate(pt), "sigma reduction failed evaluation check"


def closed_form_nminus1(n: int) -> SigmaPolynomial:
    """The (p = n-1) case in closed form: sum_{k=2}^n (-1)^k sigma_1^(n-k) sigma_k."""
    if n < 2:
        raise ValueError("need n >= 2")
    terms = {}
    for k in range(2, n + 1):
        e = [0] * n
        e[0] = n - k
        e[k - 1] += 1
        terms[tuple(e)] = Fraction((-1) ** k)
    return SigmaPolynomial(n=n, terms=terms)


def elementary_symmetric_values(lambdas) -> list:
    """Exact values [sigma_1, ..., sigma_n] at a rational point."""
    lambdas = [Fraction(x) for x in lambdas]
    n = len(lambdas)
    # coefficients of prod (1 + x t): e[k] accumulates sigma_k
    e = [Fraction(0)] * (n + 1)
    e[0] = Fraction(1)
    for x in lambdas:
        for k in range(n, 0, -1):
            e[k] += x * e[k - 1]
    return e[1:]


def eval_sigma(P: SigmaPolynomial, lambdas) -> Fraction:
    """Exact evaluation of a sigma polynomial at a rational lambda vector."""
    sig = elementary_symmetric_values(lambdas)
    total = Fraction(0)
    for exps, c in P.terms.items():
        v = c
        for s, e in zip(sig, exps):
            if e:
                v *= s ** e
        total += v
    return total


def mp_product_exact(lambdas, p: int) -> Fraction:
    """Direct product formula over all p-tuples, exactly.

    Independent of the expansion/reduction machinery; used as its oracle.
    """
    lambdas = [Fraction(x) for x in lambdas]
    n = len(lambdas)
    total = Fraction(1)
    for tup in combinations(range(n), p):
        total *= sum(lambdas[i] for i in tup)
    return total


def reduced_table_entry(n: int, p: int) -> SigmaPolynomial:
    """Exact sigma form of the operator for the given dimensions."""
    return reduce_to_sigma(expand_mp(n, p))

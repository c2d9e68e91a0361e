"""Seeded numerical certification of the operator's algebraic inequalities.

Each check sweeps deterministic cone samples per dimension pair, records the
extremal ratio it observed (so regressions are diffable), and collects
failures with enough data to reproduce them.  Checks are independent and own
their seed streams.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import cone as cone_mod
from .calculus import (
    grad_mp_adjugate_batch,
    grad_mp_diagonal,
    hess_mp_diagonal,
    tilde_grad_batch,
)
from .cone import sample_cone
from .errors import SamplerExhaustionError
from .operator import SymMatrix, mp_from_eigenvalues
from .ptuples import enumerate_tuples

DEFAULT_DIMS = tuple((n, p) for n in range(1, 7) for p in range(1, n + 1))

CHECK_CONCAVITY = "concavity"
CHECK_INF_REPRESENTATION = "inf-representation"
CHECK_TRACE_BOUND = "trace-bound"
CHECK_DOMINANT_MINOR = "dominant-minor"
CHECK_ARROWHEAD = "arrowhead"
CHECK_TOP_EIGENVALUE = "top-eigenvalue"
CHECK_OFFDIAG_HESSIAN = "offdiag-hessian"

_CHECK_TAGS = {
    CHECK_CONCAVITY: 11,
    CHECK_INF_REPRESENTATION: 12,
    CHECK_TRACE_BOUND: 13,
    CHECK_DOMINANT_MINOR: 14,
    CHECK_ARROWHEAD: 15,
    CHECK_TOP_EIGENVALUE: 16,
    CHECK_OFFDIAG_HESSIAN: 17,
}

DEFAULT_TOLERANCES = {
    CHECK_CONCAVITY: 1e-10,
    CHECK_INF_REPRESENTATION: 1e-9,
    CHECK_TRACE_BOUND: 1e-10,
    CHECK_DOMINANT_MINOR: 1e-12,
    CHECK_ARROWHEAD: 0.0,
    CHECK_TOP_EIGENVALUE: 1e-10,
    CHECK_OFFDIAG_HESSIAN: 1e-9,
}

MAX_STORED_FAILURES = 10


@dataclass
class VerifierConfig:
    """Sweep configuration shared by every check."""

    dims: tuple = DEFAULT_DIMS
    samples: int = 500
    seed: int = 42
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    delta: float = 0.5
    c: float = 0.25

    def __post_init__(self):
        self.dims = tuple((int(n), int(p)) for n, p in self.dims)
        for n, p in self.dims:
            if not 1 <= p <= n:
                raise ValueError(f"bad dimension pair (n={n}, p={p})")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 0.5]")
        if self.c <= 0:
            raise ValueError("c must be positive")
        full = dict(DEFAULT_TOLERANCES)
        full.update(self.tolerances)
        if any(t < 0 for t in full.values()):
            raise ValueError("tolerances must be non-negative")
        self.tolerances = full

    def tol(self, name: str) -> float:
        return self.tolerances[name]


@dataclass
class CheckResult:
    """Outcome of one check over every configured dimension pair."""

    name: str
    cases_run: int
    failures: list = field(default_factory=list)
    extremal_ratio: float = math.inf
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_dict(self, cfg: VerifierConfig) -> dict:
        return {
            "check": self.name,
            "dims": [list(d) for d in cfg.dims],
            "samples": cfg.samples,
            "seed": cfg.seed,
            "pass": self.passed,
            "cases_run": self.cases_run,
            "extremal_ratio": self.extremal_ratio,
            "failures": self.failures,
            "notes": self.notes,
        }


def _digest(a: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(a.shape).encode())
    h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:12]


def _record_failure(result: CheckResult, n: int, p: int, sample: int,
                    lhs: float, rhs: float, matrix: np.ndarray | None = None):
    entry = {"n": n, "p": p, "sample": sample, "lhs": float(lhs), "rhs": float(rhs)}
    if matrix is not None:
        entry["digest"] = _digest(matrix)
        if len(result.failures) < MAX_STORED_FAILURES:
            entry["matrix"] = [[float(v) for v in row] for row in matrix]
    result.failures.append(entry)


def _sub_seed(cfg: VerifierConfig, name: str, sample: int) -> int:
    return (cfg.seed * 1_000_003 + _CHECK_TAGS[name]) * 1_000_003 + sample


def _track(result: CheckResult, ratio: float):
    if ratio < result.extremal_ratio:
        result.extremal_ratio = float(ratio)


def _tilde_of(A: SymMatrix, p: int) -> float:
    w = np.linalg.eigvalsh(A.a)
    n = A.n
    mp = float(mp_from_eigenvalues(w, p))
    return max(mp, 0.0) ** (1.0 / math.comb(n, p))


# ---------------------------------------------------------------------------
# the checks


def check_concavity(cfg: VerifierConfig) -> CheckResult:
    """Midpoint concavity of the normalized operator on cone pairs."""
    result = CheckResult(name=CHECK_CONCAVITY, cases_run=0)
    tol = cfg.tol(CHECK_CONCAVITY)
    for n, p in cfg.dims:
        for s in range(cfg.samples):
            A = sample_cone(n, p, _sub_seed(cfg, CHECK_CONCAVITY, 2 * s))
            B = sample_cone(n, p, _sub_seed(cfg, CHECK_CONCAVITY, 2 * s + 1))
            mid = SymMatrix((A.a + B.a) / 2.0)
            lhs = _tilde_of(mid, p)
            rhs = (_tilde_of(A, p) + _tilde_of(B, p)) / 2.0
            scale = max(A.scale, B.scale)
            result.cases_run += 1
            _track(result, (lhs - rhs))
            if lhs + tol * scale < rhs:
                _record_failure(result, n, p, s, lhs, rhs, mid.a)
    return result


def _normalize_to_hat(A: SymMatrix, p: int) -> SymMatrix:
    """Rescale a cone matrix onto the level set mp = C(n,p)^(-C/(C-1))."""
    n = A.n
    m = math.comb(n, p)
    if m == 1:
        raise ValueError("normalization level set is undefined when C(n,p) = 1")
    w = np.linalg.eigvalsh(A.a)
    mp = float(mp_from_eigenvalues(w, p))
    if mp <= 0:
        raise ValueError("normalization needs a strict cone member")
    target = float(m) ** (-m / (m - 1.0))
    s = (target / mp) ** (1.0 / m)
    return SymMatrix(s * A.a)


def check_inf_representation(cfg: VerifierConfig) -> CheckResult:
    """The normalized value is the infimum of the gradient pairings over the
    normalized level set, with equality at the rescaled matrix itself."""
    result = CheckResult(name=CHECK_INF_REPRESENTATION, cases_run=0)
    tol = cfg.tol(CHECK_INF_REPRESENTATION)
    for n, p in cfg.dims:
        m = math.comb(n, p)
        if m == 1:
            result.notes.append(
                f"(n={n}, p={p}) skipped: level-set normalization undefined for C(n,p)=1"
            )
            continue
        for s in range(cfg.samples):
            A = sample_cone(n, p, _sub_seed(cfg, CHECK_INF_REPRESENTATION, 2 * s))
            C0 = sample_cone(n, p, _sub_seed(cfg, CHECK_INF_REPRESENTATION, 2 * s + 1))
            C = _normalize_to_hat(C0, p)
            G, _ = grad_mp_adjugate_batch(C.a[None], p)
            bound = float((G[0] * A.a).sum())
            lhs = _tilde_of(A, p)
            result.cases_run += 1
            slack = bound - lhs
            _track(result, slack / max(1.0, abs(bound)))
            if lhs > bound + tol * (1.0 + abs(bound)):
                _record_failure(result, n, p, s, lhs, bound, A.a)
            # equality at the rescaling of A itself
            Ca = _normalize_to_hat(A, p)
            Ga, _ = grad_mp_adjugate_batch(Ca.a[None], p)
            eq = float((Ga[0] * A.a).sum())
            if abs(eq - lhs) > 1e-8 * (1.0 + abs(lhs)):
                _record_failure(result, n, p, s, eq, lhs, A.a)
    return result


def check_trace_bound(cfg: VerifierConfig) -> CheckResult:
    """Stated lower bound C(n-1, p-1) for the trace of the normalized
    gradient over cone samples.

    The sharp constant attainable at multiples of the identity is p, which is
    strictly below C(n-1, p-1) whenever 1 < p < n-1, so this check fails for
    those dimension pairs; check_trace_bound_sharp certifies the provable
    constant.  The extremal ratio is min trace / C(n-1, p-1).
    """
    return _trace_bound_impl(cfg, CHECK_TRACE_BOUND, use_sharp=False)


def check_trace_bound_sharp(cfg: VerifierConfig) -> CheckResult:
    """Provable trace bound: trace of the normalized gradient >= p."""
    return _trace_bound_impl(cfg, CHECK_TRACE_BOUND, use_sharp=True,
                             name=CHECK_TRACE_BOUND + "-sharp")


def _trace_bound_impl(cfg, seed_name, use_sharp, name=None):
    result = CheckResult(name=name or seed_name, cases_run=0)
    tol = cfg.tol(CHECK_TRACE_BOUND)
    for n, p in cfg.dims:
        const = float(p) if use_sharp else float(math.comb(n - 1, p - 1))
        for s in range(cfg.samples):
            A = sample_cone(n, p, _sub_seed(cfg, seed_name, s))
            tilde, Gt = tilde_grad_batch(A.a[None], p)
            tr = float(np.trace(Gt[0]))
            result.cases_run += 1
            _track(result, tr / const)
            if tr < const - tol * A.scale:
                _record_failure(result, n, p, s, tr, const, A.a)
    return result


def _diagonal_cone_sample(n: int, p: int, seed: int) -> np.ndarray:
    """Decreasing eigenvalues of a cone sample, used as a diagonal point."""
    A = sample_cone(n, p, seed)
    return np.linalg.eigvalsh(A.a)[::-1]


def check_dominant_minor(cfg: VerifierConfig) -> CheckResult:
    """For diagonal cone members with decreasing entries, each of the last p
    diagonal gradient entries holds at least a 1/(p * C(n,p)) share of the
    gradient trace.

    The constant is sufficient because every reciprocal tuple sum is bounded
    by 1/(smallest sum), and the smallest sum's tuple contains j.
    """
    result = CheckResult(name=CHECK_DOMINANT_MINOR, cases_run=0)
    tol = cfg.tol(CHECK_DOMINANT_MINOR)
    for n, p in cfg.dims:
        theta = 1.0 / (p * math.comb(n, p))
        for s in range(cfg.samples):
            lam = _diagonal_cone_sample(n, p, _sub_seed(cfg, CHECK_DOMINANT_MINOR, s))
            g = np.diag(grad_mp_diagonal(lam, p).entries)
            total = float(g.sum())
            for j in range(n - p + 1, n + 1):
                result.cases_run += 1
                lhs = float(g[j - 1])
                rhs = theta * total
                _track(result, lhs / rhs if rhs > 0 else math.inf)
                if lhs < rhs - tol * (1.0 + abs(total)):
                    _record_failure(result, n, p, s, lhs, rhs, np.diag(lam))
    return result


def check_top_eigen(cfg: VerifierConfig) -> CheckResult:
    """Normalized top gradient entry times the top eigenvalue dominates a 1/n
    share of the normalized value."""
    result = CheckResult(name=CHECK_TOP_EIGENVALUE, cases_run=0)
    tol = cfg.tol(CHECK_TOP_EIGENVALUE)
    for n, p in cfg.dims:
        m = math.comb(n, p)
        for s in range(cfg.samples):
            lam = _diagonal_cone_sample(n, p, _sub_seed(cfg, CHECK_TOP_EIGENVALUE, s))
            g = np.diag(grad_mp_diagonal(lam, p).entries)
            mp = float(mp_from_eigenvalues(lam, p))
            tilde = mp ** (1.0 / m)
            tilde_g11 = tilde / (m * mp) * float(g[0])
            lhs = tilde_g11 * float(lam[0])
            rhs = tilde / n
            scale = 1.0 + float(np.abs(lam).max())
            result.cases_run += 1
            _track(result, lhs / rhs)
            if lhs < rhs - tol * scale:
                _record_failure(result, n, p, s, lhs, rhs, np.diag(lam))
    return result


def check_offdiag_hessian(cfg: VerifierConfig) -> CheckResult:
    """Transposed-pair second derivatives dominate the diagonal gradient in
    the squeezed regime lambda_{n-p+1} <= eps * lambda_1.

    eps = delta / (16 p (p-1)); applies to 2 <= p <= n-1 (elsewhere the
    constraint region is empty).  Each accepted sample is tested for every
    i in 2..n; one finite-difference spot check per dimension pair guards the
    second-derivative indexing.
    """
    result = CheckResult(name=CHECK_OFFDIAG_HESSIAN, cases_run=0)
    tol = cfg.tol(CHECK_OFFDIAG_HESSIAN)
    delta = cfg.delta
    factor = 2.0 * (delta + 1.0) / (delta + 2.0)
    for n, p in cfg.dims:
        if p < 2 or p > n - 1:
            result.notes.append(
                f"(n={n}, p={p}) skipped: constraint region empty outside 2 <= p <= n-1"
            )
            continue
        eps = delta / (16.0 * p * (p - 1.0))
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=[_CHECK_TAGS[CHECK_OFFDIAG_HESSIAN], cfg.seed, n, p])
        )
        accepted = 0
        attempts = 0
        fd_checked = False
        while accepted < cfg.samples and attempts < 400 * cfg.samples:
            attempts += 1
            lam1 = rng.uniform(1.0, 10.0)
            tail = rng.uniform(-0.9 * eps * lam1 / (p - 1.0), eps * lam1, size=n - 1)
            lam = np.sort(np.concatenate([[lam1], tail]))[::-1]
            sums = lam[enumerate_tuples(n, p).index_array].sum(axis=1)
            if sums.min() <= 1e-9 * lam1:
                continue
            accepted += 1
            hess = hess_mp_diagonal(lam, p)
            g = np.diag(grad_mp_diagonal(lam, p).entries)
            if not fd_checked:
                _fd_spot_check_offdiag(lam, p, hess)
                fd_checked = True
            for i in range(2, n + 1):
                lhs = -factor * float(hess.offdiag[0, i - 1])
                rhs = float(g[i - 1]) / lam1
                result.cases_run += 1
                _track(result, lhs / rhs if rhs != 0 else math.inf)
                if lhs < rhs - tol * (1.0 + abs(rhs)):
                    _record_failure(result, n, p, accepted, lhs, rhs, np.diag(lam))
        if accepted < cfg.samples:
            raise SamplerExhaustionError(
                f"squeezed-spectrum sampler stalled for (n={n}, p={p})",
                params={"n": n, "p": p, "accepted": accepted, "attempts": attempts},
            )
    return result


def _fd_spot_check_offdiag(lam: np.ndarray, p: int, hess):
    """Central second difference of a symmetric (1,i) perturbation equals
    twice the stored transposed-pair entry."""
    n = lam.size
    h = 1e-4 * (1.0 + float(np.abs(lam).max()))
    for i in (2, n):
        base = np.diag(lam).copy()
        pert = np.zeros_like(base)
        pert[0, i - 1] = pert[i - 1, 0] = 1.0
        vals = []
        for t in (h, 0.0, -h):
            w = np.linalg.eigvalsh(base + t * pert)
            vals.append(float(mp_from_eigenvalues(w, p)))
        fd = (vals[0] - 2.0 * vals[1] + vals[2]) / h**2
        exact = 2.0 * float(hess.offdiag[0, i - 1])
        if abs(fd - exact) > 5e-4 * (1.0 + abs(exact)):
            raise AssertionError(
                f"transposed-pair second derivative disagrees with finite differences: "
                f"fd={fd:.8g} exact={exact:.8g} (n={n}, p={p})"
            )


def _load_arrowhead_floors() -> dict:
    try:
        with resources.files("ppsh").joinpath("data/arrowhead_floors.json").open() as fh:
            return json.load(fh)
    except FileNotFoundError:
        return {}


def check_arrowhead(cfg: VerifierConfig) -> CheckResult:
    """Head-entry gradient share for strong arrowhead cone members.

    The claim is existence of a positive share threshold depending on
    (n, p, c) without a closed form, so the pass criterion is positivity plus
    a pinned empirical floor per dimension from a golden file; the extremal
    ratio lets regressions be diffed exactly.
    """
    result = CheckResult(name=CHECK_ARROWHEAD, cases_run=0)
    floors = _load_arrowhead_floors()
    for n, p in cfg.dims:
        if p < 2:
            result.notes.append(
                f"(n={n}, p={p}) skipped: no cone member has a negative diagonal entry"
            )
            continue
        key = f"{n}:{p}:{cfg.c:.6g}"
        floor = floors.get(key)
        if floor is None:
            result.notes.append(f"no pinned floor for {key}; positivity only")
        accepted = 0
        tries = 0
        dim_min = math.inf
        while accepted < cfg.samples and tries < 200 * cfg.samples:
            seed = _sub_seed(cfg, CHECK_ARROWHEAD, tries)
            tries += 1
            try:
                samp = cone_mod.sample_arrowhead(n, p, cfg.c, seed)
            except SamplerExhaustionError:
                continue
            if not samp.strong:
                continue
            accepted += 1
            A = samp.arrowhead.sym
            G, _ = grad_mp_adjugate_batch(A.a[None], p)
            g = np.diag(G[0])
            ratio = float(g[0] / g.sum())
            result.cases_run += 1
            dim_min = min(dim_min, ratio)
            _track(result, ratio)
            if g[0] <= 0.0:
                _record_failure(result, n, p, accepted, float(g[0]), 0.0, A.a)
            elif floor is not None and ratio < floor:
                _record_failure(result, n, p, accepted, ratio, floor, A.a)
        if accepted < cfg.samples:
            raise SamplerExhaustionError(
                f"strong arrowhead sampler stalled for (n={n}, p={p}, c={cfg.c})",
                params={"n": n, "p": p, "c": cfg.c, "accepted": accepted, "tries": tries},
            )
    return result


ALL_CHECKS = {
    CHECK_CONCAVITY: check_concavity,
    CHECK_INF_REPRESENTATION: check_inf_representation,
    CHECK_TRACE_BOUND: check_trace_bound,
    CHECK_DOMINANT_MINOR: check_dominant_minor,
    CHECK_ARROWHEAD: check_arrowhead,
    CHECK_TOP_EIGENVALUE: check_top_eigen,
    CHECK_OFFDIAG_HESSIAN: check_offdiag_hessian,
}


def run_checks(cfg: VerifierConfig, names=None) -> list:
    names = list(names or ALL_CHECKS)
    unknown = [nm for nm in names if nm not in ALL_CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {unknown}")
    return [ALL_CHECKS[nm](cfg) for nm in names]


def report_json(results, cfg: VerifierConfig, timestamp: str | None = None) -> dict:
    report = {
        "dims": [list(d) for d in cfg.dims],
        "samples": cfg.samples,
        "seed": cfg.seed,
        "delta": cfg.delta,
        "c": cfg.c,
        "all_pass": all(r.passed for r in results),
        "checks": [r.to_json_dict(cfg) for r in results],
    }
    if timestamp is not None:
        report["generated_at"] = timestamp
    return report

import json
import math

import numpy as np
import pytest

from ppsh.cone import counterexample_matrix, sample_cone
from ppsh.calculus import grad_mp_diagonal
from ppsh.operator import SymMatrix, mp_from_eigenvalues
from ppsh.verifier import (
    ALL_CHECKS,
    CHECK_ARROWHEAD,
    CHECK_TRACE_BOUND,
    VerifierConfig,
    check_arrowhead,
    check_concavity,
    check_dominant_minor,
    check_inf_representation,
    check_offdiag_hessian,
    check_top_eigen,
    check_trace_bound,
    check_trace_bound_sharp,
    report_json,
    run_checks,
)

SMALL = VerifierConfig(samples=25)


class TestConfig:
    def test_defaults(self):
        cfg = VerifierConfig()
        assert cfg.samples == 500 and cfg.seed == 42 and cfg.delta == 0.5
        assert (6, 3) in cfg.dims

    def test_validation(self):
        with pytest.raises(ValueError):
            VerifierConfig(samples=0)
        with pytest.raises(ValueError):
            VerifierConfig(delta=0.6)
        with pytest.raises(ValueError):
            VerifierConfig(dims=((2, 3),))


class TestConcavity:
    def test_passes(self):
        r = check_concavity(SMALL)
        assert r.passed and r.cases_run == 21 * SMALL.samples

    def test_equal_pair_has_zero_slack(self):
        from ppsh.operator import tilde_mp

        A = sample_cone(3, 2, 0)
        mid = SymMatrix((A.a + A.a) / 2)
        assert tilde_mp(mid, 2).tilde == pytest.approx(tilde_mp(A, 2).tilde)

    def test_worked_midpoint_example(self):
        from ppsh.operator import tilde_mp

        A = SymMatrix.diag([3.0, 2.0, 1.0])
        B = SymMatrix.identity(3)
        mid = SymMatrix.diag([2.0, 1.5, 1.0])
        lhs = tilde_mp(mid, 2).tilde
        rhs = (tilde_mp(A, 2).tilde + tilde_mp(B, 2).tilde) / 2
        assert lhs == pytest.approx((3.5 * 3.0 * 2.5) ** (1 / 3), rel=1e-12)
        assert rhs == pytest.approx((60 ** (1 / 3) + 2.0) / 2, rel=1e-12)
        assert lhs >= rhs


class TestInfRepresentation:
    def test_passes(self):
        r = check_inf_representation(SMALL)
        assert r.passed
        # C(n,p) = 1 dimensions are skipped with a note
        assert any("C(n,p)=1" in nt for nt in r.notes)

    def test_identity_equality_case(self):
        from ppsh.calculus import grad_mp_adjugate

        t = 3.0 ** (-0.5) / 2.0
        C = SymMatrix.diag([t, t, t])
        m = math.comb(3, 2)
        mp = float(mp_from_eigenvalues(np.array([t, t, t]), 2))
        assert mp == pytest.approx(float(m) ** (-m / (m - 1.0)), rel=1e-12)
        G = grad_mp_adjugate(C, 2).entries
        bound = float((G * np.eye(3)).sum())
        assert bound == pytest.approx(24 * t * t, rel=1e-12)
        assert bound == pytest.approx(2.0, rel=1e-12)


class TestTraceBound:
    def test_sharp_version_passes(self):
        r = check_trace_bound_sharp(SMALL)
        assert r.passed
        assert r.extremal_ratio >= 1.0 - 1e-12

    def test_stated_version_fails_where_binomial_exceeds_p(self):
        cfg = VerifierConfig(samples=200)
        r = check_trace_bound(cfg)
        failing = sorted({(f["n"], f["p"]) for f in r.failures})
        # exactly the pairs with C(n-1, p-1) > p can fail
        for n, p in failing:
            assert math.comb(n - 1, p - 1) > p
        assert (6, 2) in failing and (5, 3) in failing

    def test_stated_version_passes_where_constant_is_valid(self):
        dims = tuple(
            (n, p)
            for n in range(1, 7)
            for p in range(1, n + 1)
            if math.comb(n - 1, p - 1) <= p
        )
        r = check_trace_bound(VerifierConfig(dims=dims, samples=50))
        assert r.passed


class TestDominantMinor:
    def test_passes(self):
        assert check_dominant_minor(SMALL).passed

    def test_worked_example(self):
        g = np.diag(grad_mp_diagonal([3.0, 2.0, 1.0], 2).entries)
        theta = 1.0 / (2 * math.comb(3, 2))
        assert g[2] == pytest.approx(35.0)
        assert g[2] >= theta * g.sum()
        assert theta * g.sum() == pytest.approx(94.0 / 6.0, rel=1e-12)

    def test_symmetric_point_ratio(self):
        g = np.diag(grad_mp_diagonal([1.0] * 4, 2).entries)
        ratio = g[3] / g.sum()
        assert ratio == pytest.approx(1.0 / 4.0)
        assert ratio >= 1.0 / (2 * math.comb(4, 2))

    def test_bruteforce_constant_validation(self):
        # the pinned constant must survive brute minimization over 10^4
        # diagonal cone points for a representative pair
        n, p = 5, 3
        theta = 1.0 / (p * math.comb(n, p))
        worst = math.inf
        for seed in range(10_000):
            lam = np.linalg.eigvalsh(sample_cone(n, p, seed).a)[::-1]
            g = np.diag(grad_mp_diagonal(lam, p).entries)
            tot = g.sum()
            worst = min(worst, min(g[j - 1] / tot for j in range(n - p + 1, n + 1)))
        assert worst >= theta


class TestTopEigen:
    def test_passes(self):
        r = check_top_eigen(SMALL)
        assert r.passed

    def test_worked_example(self):
        lam = np.array([3.0, 2.0, 1.0])
        m = math.comb(3, 2)
        mp = float(mp_from_eigenvalues(lam, 2))
        g = np.diag(grad_mp_diagonal(lam, 2).entries)
        lhs = mp ** (1 / m) / (m * mp) * g[0] * lam[0]
        rhs = mp ** (1 / m) / 3
        assert lhs == pytest.approx(27.0 / 60.0 ** (2 / 3), rel=1e-12)
        assert rhs == pytest.approx(60.0 ** (1 / 3) / 3.0, rel=1e-12)
        assert lhs >= rhs

    def test_equality_at_symmetric_point(self):
        lam = np.array([1.0] * 5)
        m = math.comb(5, 2)
        mp = float(mp_from_eigenvalues(lam, 2))
        g = np.diag(grad_mp_diagonal(lam, 2).entries)
        lhs = mp ** (1 / m) / (m * mp) * g[0] * lam[0]
        assert lhs == pytest.approx(mp ** (1 / m) / 5.0, rel=1e-12)


class TestOffdiagHessian:
    def test_passes(self):
        r = check_offdiag_hessian(SMALL)
        assert r.passed
        assert any("skipped" in nt for nt in r.notes)

    def test_worked_example(self):
        from ppsh.calculus import hess_mp_diagonal

        lam = np.array([64.0, 1.0, -0.5])
        h = hess_mp_diagonal(lam, 2)
        g = np.diag(grad_mp_diagonal(lam, 2).entries)
        factor = 2 * 1.5 / 2.5
        lhs = -factor * h.entry(1, 2, 2, 1)
        rhs = g[1] / 64.0
        assert h.entry(1, 2, 2, 1) == pytest.approx(-65.0, rel=1e-12)
        assert lhs == pytest.approx(78.0, rel=1e-12)
        assert rhs == pytest.approx(64.98828125, rel=1e-9)
        assert lhs >= rhs


class TestArrowheadCheck:
    def test_passes_and_is_deterministic(self):
        cfg = VerifierConfig(samples=30)
        r1 = check_arrowhead(cfg)
        r2 = check_arrowhead(cfg)
        assert r1.passed
        assert r1.extremal_ratio == r2.extremal_ratio
        assert any("negative diagonal" in nt for nt in r1.notes)

    def test_counterexample_excluded_by_hypothesis(self):
        A = counterexample_matrix(0.1)
        assert float(np.diag(A.a).min()) == 1.0  # not <= -c for any c > 0


class TestReport:
    def test_json_schema(self):
        cfg = VerifierConfig(dims=((3, 2),), samples=5)
        results = run_checks(cfg, [CHECK_TRACE_BOUND, CHECK_ARROWHEAD])
        rep = report_json(results, cfg)
        assert set(rep) >= {"dims", "samples", "seed", "all_pass", "checks"}
        for chk in rep["checks"]:
            assert set(chk) >= {"check", "dims", "samples", "seed", "pass",
                                "extremal_ratio", "failures"}
        json.dumps(rep)  # must be serializable

    def test_unknown_check_rejected(self):
        with pytest.raises(ValueError):
            run_checks(VerifierConfig(samples=1), ["nope"])

    def test_failure_records_carry_matrix(self):
        cfg = VerifierConfig(dims=((6, 2),), samples=60)
        r = check_trace_bound(cfg)
        assert not r.passed
        rec = r.failures[0]
        assert {"n", "p", "sample", "lhs", "rhs", "digest", "matrix"} <= set(rec)

    def test_all_checks_registry(self):
        assert set(ALL_CHECKS) == {
            "concavity", "inf-representation", "trace-bound", "dominant-minor",
            "arrowhead", "top-eigenvalue", "offdiag-hessian",
        }

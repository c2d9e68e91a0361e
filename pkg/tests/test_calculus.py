import math

import numpy as np
import pytest

from ppsh.calculus import (
    euler_residual,
    grad_mp_adjugate,
    grad_mp_diagonal,
    grad_tilde_mp,
    hess_mp_diagonal,
    tilde_grad_batch,
)
from ppsh.cone import sample_cone
from ppsh.errors import ConeViolationError, DivisionHazardError
from ppsh.operator import SymMatrix

from _oracles import fd_gradient, fd_hess_diag_pair, fd_hess_offdiag_pair


def _diag_cone_sample(n, p, seed):
    return np.linalg.eigvalsh(sample_cone(n, p, seed).a)[::-1]


class TestGradDiagonal:
    def test_diag321(self):
        g = grad_mp_diagonal([3.0, 2.0, 1.0], 2)
        assert np.allclose(np.diag(g.entries), [27.0, 32.0, 35.0])
        assert np.all(g.entries == np.diag(np.diag(g.entries)))

    def test_symmetric_point(self):
        g = grad_mp_diagonal([1.0, 1.0, 1.0], 2)
        assert np.allclose(np.diag(g.entries), [8.0, 8.0, 8.0])

    def test_matches_finite_differences(self):
        for seed in range(10):
            lam = _diag_cone_sample(4, 2, seed)
            g = grad_mp_diagonal(lam, 2).entries
            fd = fd_gradient(np.diag(lam), 2, h=1e-5 * (1 + np.abs(lam).max()))
            assert np.abs(g - fd).max() <= 1e-6 * (1 + np.abs(g).max())

    def test_requires_decreasing(self):
        with pytest.raises(ValueError):
            grad_mp_diagonal([1.0, 2.0], 1)

    def test_division_hazard(self):
        with pytest.raises(DivisionHazardError):
            grad_mp_diagonal([1.0, -1.0], 2)


class TestGradAdjugate:
    def test_agrees_with_diagonal_route(self):
        for seed in range(20):
            lam = _diag_cone_sample(5, 3, seed)
            a = grad_mp_adjugate(SymMatrix.diag(lam), 3).entries
            d = grad_mp_diagonal(lam, 3).entries
            assert np.abs(a - d).max() <= 1e-9 * (1 + np.abs(d).max())

    def test_well_defined_at_repeated_eigenvalues(self):
        g = grad_mp_adjugate(SymMatrix.identity(3), 2).entries
        assert np.allclose(g, np.diag([8.0, 8.0, 8.0]))

    def test_well_defined_on_cone_boundary(self):
        # one tuple sum vanishes: diag(1, 1, -1), p=2 has sum 0 for (2,3)
        g = grad_mp_adjugate(SymMatrix.diag([1.0, 1.0, -1.0]), 2).entries
        fd = fd_gradient(np.diag([1.0, 1.0, -1.0]), 2)
        assert np.abs(g - fd).max() <= 1e-6 * (1 + np.abs(g).max())

    def test_matches_fd_on_general_matrices(self):
        rng = np.random.default_rng(21)
        for n in range(2, 6):
            for _ in range(5):
                b = rng.uniform(-1, 1, size=(n, n))
                A = SymMatrix.symmetrized(b)
                for p in (1, min(2, n), n):
                    g = grad_mp_adjugate(A, p).entries
                    fd = fd_gradient(A.a, p)
                    assert np.linalg.norm(g - fd) <= 1e-6 * (1 + np.linalg.norm(g))

    def test_symmetry_of_gradient(self):
        rng = np.random.default_rng(22)
        A = SymMatrix.symmetrized(rng.uniform(-1, 1, size=(5, 5)))
        g = grad_mp_adjugate(A, 2).entries
        assert np.array_equal(g, g.T)

    def test_ellipticity_on_cone_samples(self):
        for n, p in ((3, 2), (4, 3), (5, 2), (6, 4)):
            for seed in range(25):
                A = sample_cone(n, p, seed)
                g = grad_mp_adjugate(A, p).entries
                lo = np.linalg.eigvalsh(g).min()
                assert lo >= -1e-10 * (1 + np.abs(g).max())


class TestHessDiagonal:
    def test_pair_11_22(self):
        h = hess_mp_diagonal([3.0, 2.0, 1.0], 2)
        assert h.entry(1, 1, 2, 2) == pytest.approx(12.0, rel=1e-12)

    def test_pair_12_21(self):
        h = hess_mp_diagonal([3.0, 2.0, 1.0], 2)
        assert h.entry(1, 2, 2, 1) == pytest.approx(-5.0, rel=1e-12)

    def test_symmetric_perturbation_second_derivative(self):
        # full second derivative along E_12 + E_21 is 2 * (12,21) = -2(l1+l2)
        h = hess_mp_diagonal([3.0, 2.0, 1.0], 2)
        fd = fd_hess_offdiag_pair(np.array([3.0, 2.0, 1.0]), 2, 1, 2)
        assert 2.0 * h.entry(1, 2, 2, 1) == pytest.approx(-10.0, rel=1e-9)
        assert fd == pytest.approx(h.entry(1, 2, 2, 1), rel=1e-7)

    def test_all_ones_point(self):
        h = hess_mp_diagonal([1.0, 1.0, 1.0], 2)
        for k in range(1, 4):
            for r in range(1, 4):
                if k != r:
                    assert h.entry(k, k, r, r) == pytest.approx(6.0, rel=1e-12)

    def test_other_patterns_vanish(self):
        h = hess_mp_diagonal([3.0, 2.0, 1.0], 2)
        assert h.entry(1, 2, 1, 2) == 0.0
        assert h.entry(1, 1, 2, 3) == 0.0
        assert h.entry(1, 2, 1, 3) == 0.0

    def test_matches_fd_across_dims(self):
        for n, p in ((3, 2), (4, 2), (4, 3), (5, 3)):
            for seed in range(5):
                lam = _diag_cone_sample(n, p, seed)
                h = hess_mp_diagonal(lam, p)
                for k in range(1, n + 1):
                    for r in range(1, n + 1):
                        fd = fd_hess_diag_pair(lam, p, k, r)
                        exact = h.entry(k, k, r, r)
                        assert abs(fd - exact) <= 1e-5 * (1 + abs(exact))
                for k in range(1, n + 1):
                    for l in range(1, n + 1):
                        if k == l:
                            continue
                        fd = fd_hess_offdiag_pair(lam, p, k, l)
                        exact = h.entry(k, l, l, k)
                        assert abs(fd - exact) <= 1e-5 * (1 + abs(exact))


class TestEulerIdentity:
    def test_diag321(self):
        assert euler_residual(SymMatrix.diag([3.0, 2.0, 1.0]), 2) == pytest.approx(0.0, abs=1e-12)

    def test_identity_any_dims(self):
        for n in range(1, 7):
            for p in range(1, n + 1):
                assert abs(euler_residual(SymMatrix.identity(n), p)) <= 1e-12 * math.comb(n, p)

    def test_contract_on_random_samples(self):
        rng = np.random.default_rng(33)
        from ppsh.operator import eigen_spectrum, mp_from_spectrum

        for n in range(2, 7):
            for p in range(1, n + 1):
                for _ in range(20):
                    A = SymMatrix.symmetrized(rng.uniform(-2, 2, size=(n, n)))
                    m = math.comb(n, p)
                    mp = mp_from_spectrum(eigen_spectrum(A), p).mp
                    res = euler_residual(A, p)
                    assert abs(res) <= 1e-9 * (1 + m * abs(mp))


class TestGradTilde:
    def test_identity_n3(self):
        g = grad_tilde_mp(SymMatrix.identity(3), 2)
        assert np.allclose(g.entries, np.diag([2 / 3, 2 / 3, 2 / 3]))
        assert g.trace == pytest.approx(2.0, rel=1e-12)

    def test_diag321_trace(self):
        g = grad_tilde_mp(SymMatrix.diag([3.0, 2.0, 1.0]), 2)
        assert g.trace == pytest.approx(94.0 / (3.0 * 60.0 ** (2.0 / 3.0)), rel=1e-12)
        assert g.trace >= 2.0

    def test_sharp_trace_bound_holds_on_samples(self):
        # the provable constant is p, attained at multiples of the identity
        for n in range(2, 7):
            for p in range(1, n + 1):
                for seed in range(25):
                    A = sample_cone(n, p, seed)
                    g = grad_tilde_mp(A, p)
                    assert g.trace >= p - 1e-10 * A.scale

    def test_binomial_constant_fails_at_identity_when_p_small(self):
        # the trace at the identity equals p for every n, which undercuts
        # C(n-1, p-1) whenever 1 < p < n-1; (n,p) = (4,2) is the smallest case
        g = grad_tilde_mp(SymMatrix.identity(4), 2)
        assert g.trace == pytest.approx(2.0, rel=1e-12)
        assert g.trace < math.comb(3, 1)

    def test_cone_violation_outside(self):
        with pytest.raises(ConeViolationError):
            grad_tilde_mp(SymMatrix.diag([1.0, -3.0]), 2)

    def test_midpoint_concavity_sampled(self):
        from ppsh.operator import tilde_mp

        for n, p in ((3, 2), (5, 3), (6, 2)):
            for seed in range(30):
                A = sample_cone(n, p, 2 * seed)
                B = sample_cone(n, p, 2 * seed + 1)
                mid = SymMatrix((A.a + B.a) / 2)
                lhs = tilde_mp(mid, p).tilde
                rhs = (tilde_mp(A, p).tilde + tilde_mp(B, p).tilde) / 2
                assert lhs >= rhs - 1e-10 * max(A.scale, B.scale)


class TestBatchKernel:
    def test_matches_single_route(self):
        H = np.stack([sample_cone(4, 2, s).a for s in range(7)])
        tilde, Gt = tilde_grad_batch(H, 2)
        for i in range(7):
            single = grad_tilde_mp(SymMatrix(H[i]), 2)
            assert np.abs(Gt[i] - single.entries).max() <= 1e-11 * (1 + np.abs(single.entries).max())

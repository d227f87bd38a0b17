import math

import numpy as np
import pytest

from higgslab import linalg as la
from higgslab.errors import ClusteringError, ConditioningError, ContractViolationError

rng = np.random.default_rng(20240811)


def random_hermitian_form(n, spread=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    g = a @ a.conj().T + np.eye(n) * math.exp(spread)
    return la.HermitianForm(n, g)


def random_matrix(n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


class TestHermitianForm:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            la.HermitianForm(2, np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="positive definite"):
            la.HermitianForm(2, np.diag([1.0, -1.0]))

    def test_cholesky_roundtrip(self):
        h = random_hermitian_form(4)
        L = h.cholesky()
        assert np.allclose(L @ L.conj().T, h.gram)


class TestAdjoint:
    def test_identity_gram_is_conjugate_transpose(self):
        f = random_matrix(3)
        assert np.allclose(la.adjoint(f, la.HermitianForm.identity(3)), f.conj().T)

    def test_elementary_matrix_diag_gram(self):
        h = la.HermitianForm(2, np.diag([4.0, 1.0]))
        e12 = np.array([[0, 1], [0, 0]], dtype=complex)
        assert np.allclose(la.adjoint(e12, h), 4.0 * e12.T)

    def test_defining_identity(self):
        # h(fu, v) == h(u, f*v) for random vectors
        h = random_hermitian_form(3)
        f = random_matrix(3)
        fs = la.adjoint(f, h)
        for _ in range(10):
            u, v = rng.standard_normal(3) + 1j * rng.standard_normal(3), rng.standard_normal(3)
            assert abs(h.pair(f @ u, v) - h.pair(u, fs @ v)) < 1e-10 * (1 + h.norm(u) * h.norm(v))

    def test_ill_conditioned_gram_raises(self):
        h = la.HermitianForm(2, np.diag([1e14, 1.0]))
        with pytest.raises(ConditioningError):
            la.adjoint(np.eye(2, dtype=complex), h)


class TestSchur:
    def test_energy_split_random(self):
        # |f|² = |f_a|² + |f_u|² for random f and random h
        for n in (2, 3, 4, 5):
            for _ in range(20):
                f = random_matrix(n)
                h = random_hermitian_form(n, spread=0.5)
                parts = la.schur_decompose(f, h)
                assert np.allclose(parts.f, f, atol=1e-10 * np.linalg.norm(f))
                total = la.hs_norm(f, h) ** 2
                split = la.hs_norm(parts.diag_part, h) ** 2 + la.hs_norm(parts.upper_part, h) ** 2
                assert abs(total - split) < 1e-10 * (1 + total)

    def test_diagonal_part_norm_is_eigenvalue_sum(self):
        f = random_matrix(4)
        h = random_hermitian_form(4)
        parts = la.schur_decompose(f, h)
        lam = np.linalg.eigvals(f)
        assert abs(la.hs_norm(parts.diag_part, h) ** 2 - np.sum(np.abs(lam) ** 2)) < 1e-8

    def test_basis_is_h_orthonormal(self):
        f = random_matrix(3)
        h = random_hermitian_form(3)
        parts = la.schur_decompose(f, h)
        q = parts.basis
        assert np.allclose(q.conj().T @ h.gram @ q, np.eye(3), atol=1e-10)

    def test_normal_matrix_has_zero_upper(self):
        # unitarily diagonalizable w.r.t. h=I
        u, _ = np.linalg.qr(random_matrix(3))
        f = u @ np.diag([1.0, 2.0, 3.0 + 1j]) @ u.conj().T
        parts = la.schur_decompose(f, la.HermitianForm.identity(3))
        assert la.hs_norm(parts.upper_part, la.HermitianForm.identity(3)) < 1e-8

    def test_ambiguous_clustering_raises(self):
        # separated at the base tolerance but merged at 3x it
        f = np.diag([0.0, 8e-7, 1.0]).astype(complex)
        with pytest.raises(ClusteringError) as err:
            la.schur_decompose(f, la.HermitianForm.identity(3))
        assert err.value.inner_gap is not None

    def test_simpson_mochizuki_direction(self):
        # vanishing self-commutator forces vanishing strict-upper part
        for n in (2, 3, 4):
            for _ in range(25):
                f = random_matrix(n)
                h = random_hermitian_form(n)
                comm = f @ la.adjoint(f, h) - la.adjoint(f, h) @ f
                if la.hs_norm(comm, h) < 1e-12:
                    parts = la.schur_decompose(f, h)
                    assert la.hs_norm(parts.upper_part, h) < 1e-5
        # and the constructive direction on an exactly-normal instance
        h = la.HermitianForm.identity(3)
        u, _ = np.linalg.qr(random_matrix(3))
        f = u @ np.diag([1.0, 3.0, -2.0]) @ u.conj().T
        parts = la.schur_decompose(f, h)
        ratio = la.hs_norm(parts.upper_part, h)
        assert ratio < 1e-5


class TestJordanChevalley:
    def test_paper_3x3(self):
        f = np.array([[0, 1, 0], [0, 0, 1], [0, 0, 2]], dtype=complex)
        parts = la.jordan_chevalley(f)
        assert np.allclose(parts.semisimple, [[0, 0, 0.5], [0, 0, 1], [0, 0, 2]], atol=1e-10)
        assert np.allclose(parts.nilpotent, [[0, 1, -0.5], [0, 0, 0], [0, 0, 0]], atol=1e-10)

    def test_strictly_upper_is_nilpotent(self):
        f = np.triu(rng.standard_normal((4, 4)), 1).astype(complex)
        parts = la.jordan_chevalley(f)
        assert np.allclose(parts.semisimple, 0.0, atol=1e-12)

    def test_2x2_projections(self):
        parts = la.jordan_chevalley(np.array([[1, 1], [0, 2]], dtype=complex))
        assert np.allclose(parts.projections[0], [[1, -1], [0, 0]], atol=1e-12)
        assert np.allclose(parts.projections[1], [[0, 1], [0, 1]], atol=1e-12)
        assert np.allclose(parts.nilpotent, 0.0, atol=1e-12)

    def test_invariants_random(self):
        for n in (2, 3, 4, 6):
            for _ in range(30):
                f = random_matrix(n)
                parts = la.jordan_chevalley(f)
                fs, fn = parts.semisimple, parts.nilpotent
                scale = np.linalg.norm(f)
                assert np.linalg.norm(fs @ fn - fn @ fs) < 1e-10 * (1 + scale**2)
                assert np.linalg.norm(np.linalg.matrix_power(fn, n)) < 1e-8 * (1 + scale**n)
                total = sum(parts.projections)
                assert np.allclose(total, np.eye(n), atol=1e-10)
                for i, p in enumerate(parts.projections):
                    for j, q in enumerate(parts.projections):
                        expect = p if i == j else 0.0
                        assert np.allclose(p @ q, expect, atol=1e-10)
                rebuilt = sum(
                    mu * p for (mu, _), p in zip(parts.eigenvalues, parts.projections)
                )
                assert np.allclose(rebuilt, fs, atol=1e-10 * (1 + scale))

    def test_reassembly_bulk(self):
        # 10^4 instances, dims 2..6, eigenvalue gaps >= 0.1, reconstruction to 1e-10
        count = 0
        bulk = np.random.default_rng(7)
        while count < 10_000:
            n = int(bulk.integers(2, 7))
            lam = bulk.standard_normal(n) + 1j * bulk.standard_normal(n)
            dist = np.abs(lam[:, None] - lam[None, :]) + np.eye(n)
            if dist.min() < 0.1:
                continue
            nil = np.triu(bulk.standard_normal((n, n)), 1) * (bulk.random((n, n)) < 0.4)
            v = bulk.standard_normal((n, n)) + 1j * bulk.standard_normal((n, n))
            v += 3.0 * np.eye(n)  # keep the conjugation well conditioned
            f = v @ (np.diag(lam) + nil) @ np.linalg.inv(v)
            parts = la.jordan_chevalley(f)
            err = np.linalg.norm(parts.f - f) / (1 + np.linalg.norm(f))
            assert err < 1e-10
            count += 1

    def test_near_critical_warns(self):
        f = np.diag([0.0, 1e-5, 1.0]).astype(complex)
        with pytest.warns(la.NearCriticalWarning):
            la.jordan_chevalley(f)


class TestOrthogonalityDefect:
    def test_orthogonal_projection_zero(self):
        h = la.HermitianForm.identity(3)
        p = np.diag([1.0, 1.0, 0.0]).astype(complex)
        res = la.orthogonality_defect([p], h)
        assert res.defects[0] < 1e-12

    def test_oblique_delta(self):
        delta = 0.81
        p = np.array([[0, delta], [0, 1]], dtype=complex)
        res = la.orthogonality_defect([p], la.HermitianForm.identity(2))
        assert abs(res.defects[0] - delta) < 1e-12

    def test_formulas_agree_bulk(self):
        # both defect formulas agree to 1e-10 on random idempotents
        h2 = la.HermitianForm.identity(2)
        done = 0
        bulk = np.random.default_rng(11)
        while done < 2000:
            v = bulk.standard_normal((2, 2)) + 1j * bulk.standard_normal((2, 2))
            if abs(np.linalg.det(v)) < 0.3:
                continue
            p = v @ np.diag([1.0, 0.0]) @ np.linalg.inv(v)
            res = la.orthogonality_defect([p], h2)
            assert abs(res.defects[0] - res.star_defects[0]) < 1e-10 * (1 + res.defects[0])
            done += 1

    def test_non_idempotent_rejected(self):
        with pytest.raises(ContractViolationError):
            la.orthogonality_defect([np.eye(2) * 0.5], la.HermitianForm.identity(2))


class TestVectorDistance:
    def test_equal_metrics(self):
        h = random_hermitian_form(3)
        assert np.allclose(la.vector_distance(h, h).kappas, 0.0, atol=1e-12)

    def test_closed_form_diagonal(self):
        h1 = la.HermitianForm.identity(2)
        h2 = la.HermitianForm(2, np.diag([math.exp(2.0), math.exp(-2.0)]))
        assert np.allclose(la.vector_distance(h1, h2).kappas, [1.0, -1.0], atol=1e-12)

    def test_antisymmetry(self):
        h1, h2 = random_hermitian_form(4), random_hermitian_form(4)
        fwd = la.vector_distance(h1, h2).kappas
        back = la.vector_distance(h2, h1).kappas
        assert np.allclose(back, -fwd[::-1], atol=1e-10)

    def test_trace_identity(self):
        h1, h2 = random_hermitian_form(4), random_hermitian_form(4)
        kap = la.vector_distance(h1, h2).kappas
        expect = 0.5 * (np.linalg.slogdet(h1.gram)[1] - np.linalg.slogdet(h2.gram)[1])
        assert abs(kap.sum() - expect) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            la.vector_distance(la.HermitianForm.identity(2), la.HermitianForm.identity(3))


class TestCommutatorNorms:
    def test_diagonal_zero(self):
        rec = la.commutator_norms(np.diag([1.0, -1.0 + 0j]), la.HermitianForm.identity(2))
        assert max(rec.ss, rec.ns, rec.sn, rec.total) < 1e-12

    def test_nilpotent_mixed_zero(self):
        rec = la.commutator_norms(np.array([[0, 1], [0, 0]], dtype=complex), la.HermitianForm.identity(2))
        assert max(rec.ss, rec.ns, rec.sn) < 1e-12
        assert rec.total > 1.0  # [e12, e21] = diag(1,-1)

    def test_brute_force_2x2(self):
        f = np.array([[1, 1], [0, -1]], dtype=complex)
        rec = la.commutator_norms(f, la.HermitianForm.identity(2))
        comm = f @ f.conj().T - f.conj().T @ f
        assert abs(rec.ss - np.linalg.norm(comm)) < 1e-10
        assert abs(rec.sn - rec.ns) < 1e-12


class TestAlmostOrthogonalLemmas:
    def _synthetic_split(self, n, eps, seed):
        """Random splitting whose oblique/orthogonal projections differ by ~eps."""
        g = np.random.default_rng(seed)
        q, _ = np.linalg.qr(g.standard_normal((n, n)) + 1j * g.standard_normal((n, n)))
        # tilt each basis vector by eps towards the others
        tilt = np.eye(n) + eps * np.triu(g.standard_normal((n, n)), 1)
        v = q @ tilt
        return [v[:, [i]] for i in range(n)], v

    def test_pairing_bound(self):
        # |h(v_i, v_j)| <= sqrt(2)·eps·|v_i|·|v_j| for eps-almost orthogonal splits
        h = la.HermitianForm.identity(4)
        for seed in range(20):
            cols, v = self._synthetic_split(4, 0.05, seed)
            vinv = np.linalg.inv(v)
            projections = [v[:, [i]] @ vinv[[i], :] for i in range(4)]
            eps = max(la.orthogonality_defect(projections, h).defects)
            for i in range(4):
                for j in range(i + 1, 4):
                    lhs = abs(h.pair(cols[i][:, 0], cols[j][:, 0]))
                    rhs = math.sqrt(2) * eps * h.norm(cols[i][:, 0]) * h.norm(cols[j][:, 0])
                    assert lhs <= rhs + 1e-12

    def test_star_dagger_bound(self):
        # |s* - s†| <= sqrt(2n)·eps·|s_a| for s in the span of the projections
        n = 3
        h = la.HermitianForm.identity(n)
        for seed in range(20):
            _, v = self._synthetic_split(n, 0.03, seed + 100)
            vinv = np.linalg.inv(v)
            projections = [v[:, [i]] @ vinv[[i], :] for i in range(n)]
            eps = max(la.orthogonality_defect(projections, h).defects)
            g = np.random.default_rng(seed)
            coeffs = g.standard_normal(n) + 1j * g.standard_normal(n)
            s = sum(c * p for c, p in zip(coeffs, projections))
            s_star = la.adjoint(s, h)
            s_dagger = sum(np.conj(c) * p for c, p in zip(coeffs, projections))
            sa_norm = math.sqrt(np.sum(np.abs(coeffs) ** 2))
            assert la.hs_norm(s_star - s_dagger, h) <= math.sqrt(2 * n) * eps * sa_norm + 1e-12

import numpy as np
import pytest

from higgslab import kernels
from higgslab.grid import Grid, MetricField
from higgslab.kernels import _numpy as ref

rng = np.random.default_rng(99)

HAVE_COMPILED = "compiled" in kernels.available_implementations()


def random_hermitian_stack(m, n, scale=0.3):
    a = rng.standard_normal((m, n, n)) + 1j * rng.standard_normal((m, n, n))
    return scale * (a + a.conj().transpose(0, 2, 1))


class TestNumpyKernels:
    def test_expm_pair_inverse(self):
        for n in (1, 2, 3, 5):
            S = random_hermitian_stack(40, n)
            H, Hinv = ref.expm_herm_pair(S)
            assert np.abs(H @ Hinv - np.eye(n)).max() < 1e-12
            w = np.linalg.eigvalsh(H)
            assert w.min() > 0

    def test_expm_matches_scipy(self):
        from scipy.linalg import expm

        S = random_hermitian_stack(10, 3)
        H, _ = ref.expm_herm_pair(S)
        for k in range(10):
            assert np.allclose(H[k], expm(S[k]), atol=1e-12)

    def test_ordered_product_small(self):
        P = rng.standard_normal((7, 2, 2)) + 1j * rng.standard_normal((7, 2, 2))
        mat, logscale = ref.ordered_product(P)
        direct = np.eye(2, dtype=complex)
        for k in range(7):
            direct = P[k] @ direct
        assert np.allclose(mat * np.exp(logscale), direct, atol=1e-12 * np.abs(direct).max())

    def test_ordered_product_no_overflow(self):
        # factors of norm ~e each, 1000 of them: direct product would overflow
        P = np.stack([np.eye(2, dtype=complex) * np.e] * 1000)
        mat, logscale = ref.ordered_product(P)
        assert abs(logscale - 1000.0) < 1e-9
        assert np.allclose(mat, np.eye(2) / np.sqrt(1.0), atol=1e-12) or np.allclose(
            np.abs(mat).max(), 1.0
        )


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled core not built")
class TestBackendParity:
    def test_expm_parity(self):
        for n in (1, 2, 3, 4, 6):
            S = random_hermitian_stack(100, n, scale=0.8)
            H1, Hi1 = ref.expm_herm_pair(S)
            prev = kernels.implementation()
            kernels.set_implementation("compiled")
            try:
                H2, Hi2 = kernels.expm_herm_pair(S)
            finally:
                kernels.set_implementation(prev)
            scale = np.abs(H1).max()
            assert np.abs(H1 - H2).max() < 1e-12 * scale
            assert np.abs(Hi1 - Hi2).max() < 1e-12 * np.abs(Hi1).max()

    def test_residual_parity(self):
        for n in (2, 3):
            N = 15
            S = random_hermitian_stack(N * N, n).reshape(N, N, n, n)
            H, Hi = ref.expm_herm_pair(S)
            F = rng.standard_normal((N, N, n, n)) + 1j * rng.standard_normal((N, N, n, n))
            M1 = ref.residual_m(H, Hi, F, 2.5, 0.1)
            prev = kernels.implementation()
            kernels.set_implementation("compiled")
            try:
                M2 = kernels.residual_m(H, Hi, F, 2.5, 0.1)
            finally:
                kernels.set_implementation(prev)
            assert np.abs(M1 - M2).max() < 1e-11 * np.abs(M1).max()

    def test_product_parity(self):
        P = rng.standard_normal((513, 3, 3)) + 1j * rng.standard_normal((513, 3, 3))
        m1, l1 = ref.ordered_product(P)
        prev = kernels.implementation()
        kernels.set_implementation("compiled")
        try:
            m2, l2 = kernels.ordered_product(P)
        finally:
            kernels.set_implementation(prev)
        assert np.abs(m1 - m2).max() < 1e-10
        assert abs(l1 - l2) < 1e-10

    def test_default_backend_is_compiled(self):
        assert kernels.implementation() == "compiled"


class TestGrid:
    def test_spacing_and_nodes(self):
        g = Grid(1.2, 25)
        assert abs(g.spacing - 0.1) < 1e-15
        assert g.nodes[0, 0] == complex(-1.2, -1.2)
        assert g.nodes[-1, -1] == complex(1.2, 1.2)

    def test_unit_disk_must_fit(self):
        with pytest.raises(ValueError):
            Grid(0.9, 25)

    def test_odd_points_required(self):
        with pytest.raises(ValueError):
            Grid(1.2, 24)

    def test_locate_weights(self):
        g = Grid(1.2, 25)
        i, j, tx, ty = g.locate(complex(-1.15, -1.12))
        assert (i, j) == (0, 0)
        assert abs(tx - 0.5) < 1e-12 and abs(ty - 0.8) < 1e-12


class TestMetricField:
    def test_checkpoint_roundtrip_exact(self, tmp_path):
        g = Grid(1.3, 9)
        S = random_hermitian_stack(81, 2).reshape(9, 9, 2, 2)
        H, _ = ref.expm_herm_pair(S)
        m = MetricField(g, H, S, R=3.5)
        path = tmp_path / "ck.npz"
        m.save(path)
        back = MetricField.load(path)
        assert back.grid == g and back.R == 3.5
        assert np.array_equal(back.values, m.values)  # bit-exact
        assert np.array_equal(back.log_coords, m.log_coords)

    def test_version_check(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(path, format_version=np.int64(99))
        with pytest.raises(ValueError, match="version"):
            MetricField.load(path)

    def test_interpolation_positive_definite(self):
        g = Grid(1.2, 9)
        S = random_hermitian_stack(81, 2, scale=1.0).reshape(9, 9, 2, 2)
        H, _ = ref.expm_herm_pair(S)
        m = MetricField(g, H, S)
        for z in (0.0, 0.12 + 0.31j, -0.77 - 0.2j):
            w = np.linalg.eigvalsh(m.interpolate(z))
            assert w.min() > 0

    def test_validate_boundary(self):
        g = Grid(1.2, 9)
        m = MetricField.identity(g, 2)
        m.validate(boundary=lambda z: np.eye(2))
        m2 = MetricField.identity(g, 2)
        m2.values[0, 0] = np.diag([2.0, 0.5])
        with pytest.raises(ValueError, match="boundary"):
            m2.validate(boundary=lambda z: np.eye(2))

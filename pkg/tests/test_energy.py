import numpy as np
import pytest

from higgslab import Grid, SolverConfig
from higgslab.energy import energy_comparison_sweep, pullback_tensors
from higgslab.grid import MetricField
from higgslab.linalg import HermitianForm, hs_norm, schur_decompose
from higgslab.solver import solve

from conftest import diagonal_field, nilpotent_field, semisimple_field


class TestPullbackTensors:
    def test_diagonal_field_zero_gap(self):
        grid = Grid(1.2, 33)
        ident = MetricField.identity(grid, 2)
        t = pullback_tensors(diagonal_field(), ident, 3.0)
        assert np.abs(t.gap).max() < 1e-12
        assert np.allclose(t.toral_mixed, 2.0)

    def test_holomorphic_part_is_spectral(self):
        # tr f² equals the eigenvalue power sum identically
        grid = Grid(1.2, 33)
        phi = semisimple_field()
        metric, _ = solve(phi, 2.0, grid, SolverConfig())
        t = pullback_tensors(phi, metric, 2.0)
        assert np.abs(t.g_holo - t.R**2 * t.toral_holo).max() < 1e-10

    def test_gap_is_upper_schur_energy(self):
        # node-wise: g_mixed - R²·toral_mixed == R²·|f_u|², the latter from an
        # actual h-orthonormal triangularizing basis at sampled nodes
        grid = Grid(1.2, 33)
        phi = semisimple_field()
        R = 2.0
        metric, _ = solve(phi, R, grid, SolverConfig())
        t = pullback_tensors(phi, metric, R)
        rng = np.random.default_rng(0)
        ii = rng.integers(3, 30, size=12)
        jj = rng.integers(3, 30, size=12)
        for i, j in zip(ii, jj):
            h = HermitianForm(2, metric.values[i, j])
            parts = schur_decompose(phi(grid.nodes[i, j]), h)
            u2 = hs_norm(parts.upper_part, h) ** 2
            assert t.gap[i, j] == pytest.approx(R * R * u2, abs=1e-9 * (1 + R * R))

    def test_nilpotent_toral_vanishes(self, nilpotent_ladder65):
        grid, targets, metrics, _ = nilpotent_ladder65
        t = pullback_tensors(nilpotent_field(), metrics[4.0], 4.0)
        assert np.abs(t.toral_mixed).max() < 1e-12
        mask = grid.disk_mask(0.5)
        vals = t.g_mixed[mask]
        assert vals.max() > 0.05  # nilpotent contribution present
        assert vals.max() < 2.0  # but bounded

    def test_lower_bound_never_violated(self, nilpotent_ladder65):
        grid, targets, metrics, _ = nilpotent_ladder65
        for R in targets:
            t = pullback_tensors(nilpotent_field(), metrics[R], R)
            assert t.gap.min() >= -1e-8 * R * R


class TestEnergySweep:
    def test_semisimple_gap_decays(self):
        grid = Grid(1.2, 49)
        es = energy_comparison_sweep(
            semisimple_field(), [1, 2, 3, 4, 5], grid, SolverConfig()
        )
        assert es.verdict_decaying
        assert es.sweep.fit_model == "exponential" and es.sweep.fit_c > 0
        assert es.min_gap >= -1e-8 * 25

    def test_nilpotent_gap_bounded_nonvanishing(self, nilpotent_ladder65):
        grid, targets, metrics, _ = nilpotent_ladder65
        es = energy_comparison_sweep(
            nilpotent_field(), targets, grid, SolverConfig(), metrics=metrics
        )
        y = es.sweep.measurements
        assert not es.verdict_decaying
        assert y[-1] > 0.1 * y[0]  # non-vanishing
        assert y.max() <= 2.0 * np.median(y)  # bounded

    def test_conformal_covariance_of_area_form(self):
        # e·dA is unchanged under rescaling the flat reference metric:
        # the density scales by 1/c², the area element by c²
        grid = Grid(1.2, 33)
        phi = semisimple_field()
        metric, _ = solve(phi, 2.0, grid, SolverConfig())
        t = pullback_tensors(phi, metric, 2.0)
        c = 1.7
        density = t.g_mixed  # per unit |dz|²
        total = density.sum() * grid.spacing**2
        total_rescaled = (density / c**2).sum() * (c * grid.spacing) ** 2
        assert total == pytest.approx(total_rescaled, rel=1e-12)

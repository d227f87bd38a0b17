"""Pullback metric tensors of the harmonic map and of its toral comparison.

For trace-free fields with the trace form, the pullback of the symmetric-
space metric splits into a |dz|² coefficient R²|f|ₕ² and a dz² coefficient
R²·tr(f²); the toral counterparts are Σ|λ_i|² and Σλ_i² from the pointwise
eigenvalues.  The |dz|² gap between the two is the strictly-upper Schur
energy R²·|f_u|ₕ², computed here in Cholesky-whitened coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .fields import HiggsField, evaluate
from .grid import Grid, MetricField
from .measures import DecaySweep, fit_decay
from .solver import SolverConfig, solve_ray

__all__ = ["PullbackTensors", "pullback_tensors", "energy_comparison_sweep", "EnergySweep"]


@dataclass(frozen=True)
class PullbackTensors:
    """Grid fields of the pullback tensors at one coupling.

    ``g_mixed`` is the |dz|² coefficient R²|f|ₕ²; ``g_holo`` the dz²
    coefficient R²·tr f²; ``toral_*`` are the eigenvalue counterparts, and
    ``a_part``/``u_part`` split |f|ₕ² into Σ|λ|² plus the strictly-upper
    remainder (so g_mixed − R²·toral_mixed = R²·u_part node-wise).
    """

    R: float
    g_mixed: np.ndarray
    g_holo: np.ndarray
    toral_mixed: np.ndarray
    toral_holo: np.ndarray
    a_part: np.ndarray
    u_part: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.g_mixed - self.R * self.R * self.toral_mixed


def pullback_tensors(phi: HiggsField, metric: MetricField, R: float) -> PullbackTensors:
    """Evaluate all tensor fields on the grid nodes.

    |f|ₕ² is computed as the Frobenius norm of the whitened L† f L^{-†}
    (gram = L L†), which keeps the cancellation in the gap benign even when
    H carries large dynamic range.
    """
    grid = metric.grid
    nodes = grid.nodes
    F = evaluate(phi, nodes)
    H = metric.values
    L = np.linalg.cholesky(H)
    Lh = L.conj().swapaxes(-1, -2)
    W = Lh @ F @ np.linalg.inv(Lh)
    norm_sq = np.sum(np.abs(W) ** 2, axis=(-2, -1))
    lam = np.linalg.eigvals(F)
    toral_mixed = np.sum(np.abs(lam) ** 2, axis=-1)
    toral_holo = np.sum(lam * lam, axis=-1)
    g_holo = R * R * np.einsum("...ij,...ji->...", F, F)
    u_part = np.maximum(norm_sq - toral_mixed, 0.0)
    r2 = R * R
    return PullbackTensors(
        R=R,
        g_mixed=r2 * norm_sq,
        g_holo=g_holo,
        toral_mixed=toral_mixed,
        toral_holo=toral_holo,
        a_part=toral_mixed,
        u_part=u_part,
        x=nodes.real,
        y=nodes.imag,
    )


@dataclass
class EnergySweep:
    sweep: DecaySweep
    tensors: dict  # R -> PullbackTensors
    min_gap: float  # most negative gap seen anywhere (sign check)
    verdict_decaying: bool


def energy_comparison_sweep(
    phi: HiggsField,
    R_values,
    grid: Grid,
    config: SolverConfig | None = None,
    region_radius: float = 0.5,
    fit_floor: float = 1e-12,
    metrics: dict | None = None,
) -> EnergySweep:
    """Sweep of max over the region of (g_mixed − R²·toral_mixed).

    The gap is bounded in general and decays exponentially when the field is
    generically semisimple; ``verdict_decaying`` reports which happened.
    """
    R_values = sorted(float(r) for r in R_values)
    if metrics is None:
        metrics, _ = solve_ray(phi, R_values, grid, config)
    mask = grid.disk_mask(region_radius)
    vals = []
    tensors = {}
    min_gap = np.inf
    for R in R_values:
        t = pullback_tensors(phi, metrics[R], R)
        tensors[R] = t
        vals.append(float(t.gap[mask].max()))
        min_gap = min(min_gap, float(t.gap.min()))
    sw = DecaySweep(np.array(R_values), np.array(vals), "energy_gap", fit_floor)
    try:
        fit_decay(sw)
    except InsufficientDataError:
        pass
    half = len(vals) // 2
    decaying = sw.confirmed_decay and vals[-1] < 1e-2 * (max(vals[:half]) + fit_floor)
    return EnergySweep(sweep=sw, tensors=tensors, min_gap=min_gap, verdict_decaying=decaying)

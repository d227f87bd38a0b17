"""Asymptotic-decoupling measurements across coupling sweeps, plus decay fits.

Everything here is a sup over a measurement disk (default D(1/2)) of a
pointwise, gauge-independent norm: orthogonality defects of the eigenspace
splitting, the nilpotent-part norm, almost-parallelity of the eigen
sub-bundles, mixed commutator norms, the flat-connection expansion
remainder, and the decoupled-equation residuals.  A sweep pairs these with
increasing couplings R and fits exponential or reciprocal decay laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InternalInconsistencyError, PathTooCoarseError
from .fields import HiggsField, evaluate
from .grid import Grid, MetricField
from .linalg import cluster_points
from .solver import SolverConfig, chern_connection, curvature, solve_ray

__all__ = [
    "RegionFrames",
    "DecaySweep",
    "CommutatorSups",
    "RemainderParts",
    "DecoupledResiduals",
    "ParallelityMeasure",
    "measure_orthogonality",
    "measure_nilpotent_norm",
    "measure_parallelity",
    "measure_commutators",
    "connection_remainder",
    "decoupled_residuals",
    "fit_decay",
    "run_decay_sweep",
    "SWEEP_QUANTITIES",
]


# ---------------------------------------------------------------------------
# pointwise spectral frames on a disk region


class RegionFrames:
    """Eigen-cluster data of a field on the nodes of a disk, consistently labeled.

    The frames depend only on the field and the grid, so one instance serves a
    whole coupling sweep.  Labels are matched from node to node by nearest
    projection, row by row; a jump bigger than a quarter of the local cluster
    gap raises.  A one-node halo around the disk supports centered derivatives.
    """

    def __init__(self, phi: HiggsField, grid: Grid, radius: float = 0.5):
        from .linalg import jordan_chevalley

        self.phi = phi
        self.grid = grid
        self.radius = float(radius)
        nodes = grid.nodes
        inside = grid.disk_mask(self.radius)
        ii, jj = np.nonzero(inside)
        h = grid.spacing
        self.i0, self.i1 = int(ii.min()) - 1, int(ii.max()) + 2
        self.j0, self.j1 = int(jj.min()) - 1, int(jj.max()) + 2
        self.box = np.s_[self.i0 : self.i1, self.j0 : self.j1]
        z_box = nodes[self.box]
        self.mask = np.abs(z_box) <= self.radius
        nx, ny = z_box.shape
        n = phi.rank

        ref = jordan_chevalley(evaluate(phi, z_box[0, 0]))
        m = ref.cluster_count
        self.m = m
        self.mults = tuple(mult for _, mult in ref.eigenvalues)
        self.lam = np.empty((nx, ny, m), dtype=complex)
        self.proj = np.empty((nx, ny, m, n, n), dtype=complex)
        self.f_s = np.empty((nx, ny, n, n), dtype=complex)
        self.f_n = np.empty((nx, ny, n, n), dtype=complex)
        self.f = evaluate(phi, z_box)

        for ix in range(nx):
            for jy in range(ny):
                parts = jordan_chevalley(self.f[ix, jy])
                if parts.cluster_count != m:
                    raise PathTooCoarseError(
                        f"cluster count changes inside the region at z={z_box[ix, jy]:.4g}"
                    )
                lam = np.array([v for v, _ in parts.eigenvalues])
                pr = np.stack(parts.projections)
                if ix == 0 and jy == 0:
                    order = np.arange(m)
                else:
                    prev = self.proj[ix, jy - 1] if jy > 0 else self.proj[ix - 1, jy]
                    order = _match_projections(prev, pr)
                self.lam[ix, jy] = lam[order]
                self.proj[ix, jy] = pr[order]
                self.f_s[ix, jy] = parts.semisimple
                self.f_n[ix, jy] = parts.nilpotent

        self.eig_expanded = np.repeat(self.lam, self.mults, axis=-1)

    def metric_box(self, metric: MetricField) -> np.ndarray:
        return metric.values[self.box]


def _match_projections(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    m = prev.shape[0]
    cost = np.array(
        [[np.linalg.norm(cur[b] - prev[a]) for b in range(m)] for a in range(m)]
    )
    order = np.empty(m, dtype=int)
    used = set()
    for a in range(m):
        b = int(np.argmin(cost[a]))
        if b in used:
            raise InternalInconsistencyError("projection labeling collapsed between nodes")
        d_sorted = np.sort(cost[a])
        if m > 1 and d_sorted[0] > 0.5 * d_sorted[1]:
            raise InternalInconsistencyError(
                "ambiguous projection relabeling between adjacent nodes; grid too coarse"
            )
        used.add(b)
        order[a] = b
    return order


# ---------------------------------------------------------------------------
# pointwise norm helpers (batched over nodes)


def _hs_norm_sq(X: np.ndarray, H: np.ndarray, Hinv: np.ndarray) -> np.ndarray:
    """|X|ₕ² = Re tr(X H⁻¹ X† H) per node."""
    Xs = Hinv @ X.conj().swapaxes(-1, -2) @ H
    return np.einsum("...ij,...ji->...", X, Xs).real


def _adjoint_field(X: np.ndarray, H: np.ndarray, Hinv: np.ndarray) -> np.ndarray:
    return Hinv @ X.conj().swapaxes(-1, -2) @ H


def _sup(values: np.ndarray, mask: np.ndarray) -> float:
    return float(np.sqrt(np.maximum(values[mask], 0.0).max()))


# ---------------------------------------------------------------------------
# the measured quantities


def measure_orthogonality(frames: RegionFrames, metric: MetricField) -> float:
    """Sup over the region of max_i |π_i − π_i'|ₕ, via the trace formula.

    Cross-checked node-wise against (1/√2)|π_i − π_i^*|ₕ to 1e-9.
    """
    H = frames.metric_box(metric)
    Hinv = np.linalg.inv(H)
    worst = 0.0
    eps = float(np.finfo(float).eps)
    for i in range(frames.m):
        p = frames.proj[:, :, i]
        pstar = _adjoint_field(p, H, Hinv)
        n2 = np.einsum("...ij,...ji->...", p, pstar).real
        d2 = n2 - frames.mults[i]
        alt2 = 0.5 * _hs_norm_sq(p - pstar, H, Hinv)
        d = np.sqrt(np.maximum(d2, 0.0))
        alt = np.sqrt(np.maximum(alt2, 0.0))
        gap = float(np.abs(d - alt)[frames.mask].max())
        # below sqrt(eps·|π|ₕ²) the defect itself is roundoff; 1e-9 applies above it
        noise = math.sqrt(eps * (1.0 + float(n2[frames.mask].max())))
        if gap > 1e-9 * (1.0 + float(d[frames.mask].max())) + noise:
            raise InternalInconsistencyError(
                f"orthogonality defect formulas disagree by {gap:.3e}"
            )
        worst = max(worst, _sup(d2, frames.mask))
    return worst


def measure_nilpotent_norm(frames: RegionFrames, metric: MetricField, R: float) -> float:
    """Sup over the region of |R·f_n|ₕ."""
    H = frames.metric_box(metric)
    Hinv = np.linalg.inv(H)
    n2 = _hs_norm_sq(R * frames.f_n, H, Hinv)
    return _sup(n2, frames.mask)


@dataclass(frozen=True)
class ParallelityMeasure:
    """Sup of |∂ₕπ_i|ₕ and of the second-fundamental-form block |B_i|ₕ."""

    value: float
    second_fundamental: float


def measure_parallelity(frames: RegionFrames, metric: MetricField) -> ParallelityMeasure:
    """Almost-parallelity of the eigen sub-bundles.

    ∂ₕπ_i = ∂zπ_i + [H⁻¹∂zH, π_i] with centered differences of the labeled
    projection field; B_i is its Hom(E_i, E_i^⊥) block, cut with the
    h-orthogonal projector built from the range of π_i.
    """
    h = frames.grid.spacing
    H = frames.metric_box(metric)
    Hinv = np.linalg.inv(H)
    C1 = chern_connection(metric)[frames.box]
    n = frames.phi.rank
    eye = np.eye(n)
    worst = 0.0
    worst_b = 0.0
    for i in range(frames.m):
        p = frames.proj[:, :, i]
        dx = np.full_like(p, np.nan)
        dy = np.full_like(p, np.nan)
        dx[1:-1] = (p[2:] - p[:-2]) / (2 * h)
        dy[:, 1:-1] = (p[:, 2:] - p[:, :-2]) / (2 * h)
        dz = 0.5 * (dx - 1j * dy)
        dh = dz + C1 @ p - p @ C1
        val2 = _hs_norm_sq(dh, H, Hinv)
        worst = max(worst, _sup(np.nan_to_num(val2), frames.mask))

        # orthogonal projector onto range(π_i): π' = B (B†HB)⁻¹ B† H, with the
        # basis from a batched SVD (the cluster rank is constant on the region)
        k = frames.mults[i]
        u, _, _ = np.linalg.svd(p)
        basis = u[..., :, :k]
        bh = basis.conj().swapaxes(-1, -2)
        gram = bh @ H @ basis
        porth = basis @ np.linalg.solve(gram, bh @ H)
        bi = (eye - porth) @ dh @ porth
        b2 = np.nan_to_num(_hs_norm_sq(bi, H, Hinv))
        worst_b = max(worst_b, _sup(b2, frames.mask))
    return ParallelityMeasure(value=worst, second_fundamental=worst_b)


@dataclass(frozen=True)
class CommutatorSups:
    """Sup norms of the scaled commutators and the curvature balance."""

    ss: float  # |[Rf_s, (Rf_s)*]|
    ns: float  # |[Rf_n, (Rf_s)*]|
    sn: float  # |[Rf_s, (Rf_n)*]|
    curvature_balance: float  # |F(h) + [Rf_n, (Rf_n)*]|


def measure_commutators(frames: RegionFrames, metric: MetricField, R: float) -> CommutatorSups:
    """Scaled commutator sups; the balance term pairs the curvature coefficient
    (of dz̄∧dz) with −R²[f_n, f_n*], matching the sign of the 2-form sum."""
    H = frames.metric_box(metric)
    Hinv = np.linalg.inv(H)
    fs, fn = frames.f_s, frames.f_n
    fs_st = _adjoint_field(fs, H, Hinv)
    fn_st = _adjoint_field(fn, H, Hinv)
    comm = lambda a, b: a @ b - b @ a
    r2 = R * R
    F = curvature(metric)[frames.box]
    return CommutatorSups(
        ss=r2 * _sup(_hs_norm_sq(comm(fs, fs_st), H, Hinv), frames.mask),
        ns=r2 * _sup(_hs_norm_sq(comm(fn, fs_st), H, Hinv), frames.mask),
        sn=r2 * _sup(_hs_norm_sq(comm(fs, fn_st), H, Hinv), frames.mask),
        curvature_balance=_sup(
            _hs_norm_sq(F - r2 * comm(fn, fn_st), H, Hinv), frames.mask
        ),
    )


@dataclass(frozen=True)
class RemainderParts:
    """Pieces of the flat-connection expansion remainder a = D_h − (block form)."""

    chern: float  # |H⁻¹∂zH − (H⊕)⁻¹∂zH⊕|
    semisimple_adjoint: float  # |R(f_s* − f_s†)|
    nilpotent_adjoint: float  # |R(f_n* − f_n^{*⊕})|
    total: float


def connection_remainder(frames: RegionFrames, metric: MetricField, R: float) -> RemainderParts:
    """Sup of the remainder after subtracting the block-diagonal model of D_h.

    The dz-part of the remainder is the Chern-coefficient discrepancy against
    the direct-sum metric H⊕ = Σ π_i† H π_i; the dz̄-part collects the two
    adjoint discrepancies.  |a|ₕ² sums the squares of both components.
    """
    h = frames.grid.spacing
    H = frames.metric_box(metric)
    Hinv = np.linalg.inv(H)
    C1 = chern_connection(metric)[frames.box]

    Hop = np.zeros_like(H)
    for i in range(frames.m):
        p = frames.proj[:, :, i]
        Hop += p.conj().swapaxes(-1, -2) @ H @ p
    dx = np.full_like(Hop, np.nan)
    dy = np.full_like(Hop, np.nan)
    dx[1:-1] = (Hop[2:] - Hop[:-2]) / (2 * h)
    dy[:, 1:-1] = (Hop[:, 2:] - Hop[:, :-2]) / (2 * h)
    dz_Hop = 0.5 * (dx - 1j * dy)
    C1op = np.linalg.solve(Hop, np.nan_to_num(dz_Hop))
    az = C1 - C1op

    Hop_inv = np.linalg.inv(Hop)
    fs, fn = frames.f_s, frames.f_n
    fs_dag = np.zeros_like(fs)
    for i in range(frames.m):
        fs_dag += np.conj(frames.lam[:, :, i])[..., None, None] * frames.proj[:, :, i]
    ds = R * (_adjoint_field(fs, H, Hinv) - fs_dag)
    dn = R * (_adjoint_field(fn, H, Hinv) - _adjoint_field(fn, Hop, Hop_inv))

    az2 = np.nan_to_num(_hs_norm_sq(az, H, Hinv))
    ds2 = _hs_norm_sq(ds, H, Hinv)
    dn2 = _hs_norm_sq(dn, H, Hinv)
    azb2 = np.nan_to_num(_hs_norm_sq(ds + dn, H, Hinv))
    return RemainderParts(
        chern=_sup(az2, frames.mask),
        semisimple_adjoint=_sup(ds2, frames.mask),
        nilpotent_adjoint=_sup(dn2, frames.mask),
        total=_sup(az2 + azb2, frames.mask),
    )


@dataclass(frozen=True)
class DecoupledResiduals:
    """Residuals of the limiting decoupled system with h ← h_R, ψ ← R·f_n."""

    curvature_balance: float  # |F(h) + [ψ, ψ*]|
    semisimple: float  # |[f_s, f_s*]|
    mixed: float  # |[f_s, ψ*]|


def decoupled_residuals(frames: RegionFrames, metric: MetricField, R: float) -> DecoupledResiduals:
    H = frames.metric_box(metric)
    Hinv = np.linalg.inv(H)
    fs = frames.f_s
    psi = R * frames.f_n
    fs_st = _adjoint_field(fs, H, Hinv)
    psi_st = _adjoint_field(psi, H, Hinv)
    comm = lambda a, b: a @ b - b @ a
    F = curvature(metric)[frames.box]
    # the curvature coefficient carries dz̄∧dz while [ψ,ψ*] carries dz∧dz̄
    return DecoupledResiduals(
        curvature_balance=_sup(_hs_norm_sq(F - comm(psi, psi_st), H, Hinv), frames.mask),
        semisimple=_sup(_hs_norm_sq(comm(fs, fs_st), H, Hinv), frames.mask),
        mixed=_sup(_hs_norm_sq(comm(fs, psi_st), H, Hinv), frames.mask),
    )


# ---------------------------------------------------------------------------
# decay sweeps and fits


@dataclass
class DecaySweep:
    """Measurements along increasing couplings with a fitted decay law.

    ``fit_model`` is 'exponential' (log y = log C − cR), 'reciprocal'
    (y = C/R), or 'none' when nothing rose above the censoring floor.
    """

    R_values: np.ndarray
    measurements: np.ndarray
    quantity_tag: str
    floor: float
    censored: np.ndarray = field(default=None)
    fit_C: float = math.nan
    fit_c: float = math.nan
    fit_model: str = "none"
    fit_residual: float = math.nan

    def __post_init__(self):
        self.R_values = np.asarray(self.R_values, dtype=float)
        self.measurements = np.asarray(self.measurements, dtype=float)
        if np.any(np.diff(self.R_values) <= 0):
            raise ValueError("coupling values must increase")
        if np.any(self.measurements < 0):
            raise ValueError("measurements must be nonnegative")
        if self.censored is None:
            self.censored = self.measurements <= self.floor

    @property
    def confirmed_decay(self) -> bool:
        return (
            self.fit_model == "exponential"
            and self.fit_c > 0.0
            and self.fit_residual <= 0.2
        )

    def eventually_decreasing(self, min_len: int = 3) -> bool:
        y = self.measurements
        for start in range(len(y) - min_len + 1):
            tail = y[start:]
            if len(tail) >= min_len and np.all(np.diff(tail) < 0):
                return True
        return False


def fit_decay(sweep: DecaySweep) -> DecaySweep:
    """Least-squares decay fit over the uncensored points (in place).

    Both the exponential and the reciprocal model are fitted in log space;
    the one with the smaller RMS residual is kept.
    """
    keep = ~sweep.censored
    R = sweep.R_values[keep]
    y = sweep.measurements[keep]
    if len(R) < 4:
        raise InsufficientDataError(
            f"{sweep.quantity_tag}: only {len(R)} uncensored points (need 4)"
        )
    ly = np.log(y)
    # exponential: ly = logC - cR
    A = np.vstack([np.ones_like(R), -R]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res_exp = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    # reciprocal: ly = logC - logR
    logC_rec = float(np.mean(ly + np.log(R)))
    res_rec = float(np.sqrt(np.mean((logC_rec - np.log(R) - ly) ** 2)))
    if res_exp <= res_rec:
        sweep.fit_model = "exponential"
        sweep.fit_C = float(np.exp(coef[0]))
        sweep.fit_c = float(coef[1])
        sweep.fit_residual = res_exp
    else:
        sweep.fit_model = "reciprocal"
        sweep.fit_C = float(np.exp(logC_rec))
        sweep.fit_c = math.nan
        sweep.fit_residual = res_rec
    return sweep


SWEEP_QUANTITIES = (
    "orthogonality",
    "nilpotent_norm",
    "parallelity",
    "second_fundamental",
    "commutator_ss",
    "commutator_ns",
    "commutator_sn",
    "curvature_balance",
    "remainder_total",
    "remainder_chern",
    "remainder_semisimple_adjoint",
    "remainder_nilpotent_adjoint",
    "decoupled_curvature",
    "decoupled_semisimple",
    "decoupled_mixed",
)


def measure_all(frames: RegionFrames, metric: MetricField, R: float) -> dict:
    """All sweep quantities at one coupling, keyed by SWEEP_QUANTITIES names."""
    out = {}
    if frames.m >= 2:
        out["orthogonality"] = measure_orthogonality(frames, metric)
        par = measure_parallelity(frames, metric)
        out["parallelity"] = par.value
        out["second_fundamental"] = par.second_fundamental
        rem = connection_remainder(frames, metric, R)
        out["remainder_total"] = rem.total
        out["remainder_chern"] = rem.chern
        out["remainder_semisimple_adjoint"] = rem.semisimple_adjoint
        out["remainder_nilpotent_adjoint"] = rem.nilpotent_adjoint
    out["nilpotent_norm"] = measure_nilpotent_norm(frames, metric, R)
    com = measure_commutators(frames, metric, R)
    out["commutator_ss"] = com.ss
    out["commutator_ns"] = com.ns
    out["commutator_sn"] = com.sn
    out["curvature_balance"] = com.curvature_balance
    dec = decoupled_residuals(frames, metric, R)
    out["decoupled_curvature"] = dec.curvature_balance
    out["decoupled_semisimple"] = dec.semisimple
    out["decoupled_mixed"] = dec.mixed
    return out


@dataclass
class SweepResult:
    R_values: list
    metrics: dict
    reports: dict
    frames: RegionFrames
    sweeps: dict  # quantity -> DecaySweep
    floor: float


def run_decay_sweep(
    phi: HiggsField,
    R_values,
    grid: Grid,
    config: SolverConfig | None = None,
    region_radius: float = 0.5,
    fit_floor: float = 1e-12,
    jobs: int = 1,
) -> SweepResult:
    """Solve along the ray, measure every quantity at each coupling, fit decays.

    The censoring floor is max(fit_floor, 10× the worst achieved residual).
    Fits that end up with fewer than four uncensored points are left with
    fit_model='none' rather than raising.
    """
    R_values = sorted(float(r) for r in R_values)
    metrics, reports = solve_ray(phi, R_values, grid, config)
    frames = RegionFrames(phi, grid, region_radius)

    def one(R):
        return measure_all(frames, metrics[R], R)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(one, R_values))
    else:
        rows = [one(R) for R in R_values]

    floor = max(fit_floor, 10.0 * max(rep.residual_sup for rep in reports.values()))
    sweeps = {}
    for q in rows[0]:
        y = np.array([row[q] for row in rows])
        sw = DecaySweep(np.array(R_values), y, q, floor)
        try:
            fit_decay(sw)
        except InsufficientDataError:
            pass
        sweeps[q] = sw
    return SweepResult(R_values, metrics, reports, frames, sweeps, floor)

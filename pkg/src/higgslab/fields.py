"""Holomorphic matrix fields with polynomial entries on a planar square domain.

A field is an n×n matrix of complex polynomials in z, thought of as the
coefficient of a matrix-valued (1,0)-form f(z)dz.  This module evaluates
spectral data, locates the branch-collision set, certifies gap/size bounds
on the unit disk, and continues eigenvalue branches along paths.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import linear_sum_assignment

from .errors import (
    DegenerateFamilyError,
    DomainError,
    NonCriticalPathError,
    NotCertifiableError,
    PathTooCoarseError,
)
from .linalg import cluster_points

__all__ = [
    "HiggsField",
    "SpectralCertificate",
    "PathSpec",
    "BranchTracks",
    "evaluate",
    "critical_set",
    "certify_S",
    "branch_continuation",
    "alpha_integrals",
]


@dataclass(frozen=True)
class HiggsField:
    """n×n matrix of complex polynomials in z on the square [-L, L]².

    ``coeffs`` has shape (n, n, degree+1) in ascending powers of z.
    """

    rank: int
    coeffs: np.ndarray
    half_width: float = 1.2

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[0] != self.rank or c.shape[1] != self.rank:
            raise ValueError(f"coeffs must have shape ({self.rank},{self.rank},D+1)")
        if self.half_width < 1.0:
            raise ValueError("domain half-width must be at least 1")
        object.__setattr__(self, "coeffs", c)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, matrix, half_width: float = 1.2) -> "HiggsField":
        m = np.asarray(matrix, dtype=complex)
        return cls(m.shape[0], m[:, :, None], half_width)

    @classmethod
    def from_entries(cls, entries, half_width: float = 1.2) -> "HiggsField":
        """Build from a nested list of per-entry coefficient lists (ascending)."""
        n = len(entries)
        deg = max(len(e) for row in entries for e in row)
        c = np.zeros((n, n, deg), dtype=complex)
        for i, row in enumerate(entries):
            for j, e in enumerate(row):
                c[i, j, : len(e)] = e
        return cls(n, c, half_width)

    # -- basic properties --------------------------------------------------

    @property
    def degree(self) -> int:
        return self.coeffs.shape[2] - 1

    @property
    def trace_free(self) -> bool:
        return bool(np.max(np.abs(np.trace(self.coeffs, axis1=0, axis2=1))) < 1e-14)

    def scaled(self, r: float) -> "HiggsField":
        return HiggsField(self.rank, r * self.coeffs, self.half_width)

    def conjugated(self, g: np.ndarray) -> "HiggsField":
        """Change of trivialization f -> g⁻¹ f g by a constant matrix."""
        ginv = np.linalg.inv(g)
        new = np.einsum("ij,jkd,kl->ild", ginv, self.coeffs, g)
        return HiggsField(self.rank, new, self.half_width)

    def __call__(self, z):
        return evaluate(self, z)

    # -- serialization (higgsfield/v1) -------------------------------------

    def to_json(self) -> str:
        pairs = [
            [[[c.real, c.imag] for c in self.coeffs[i, j]] for j in range(self.rank)]
            for i in range(self.rank)
        ]
        doc = {
            "format": "higgsfield/v1",
            "rank": self.rank,
            "degree": self.degree,
            "half_width": self.half_width,
            "trace_free": self.trace_free,
            "coeffs": pairs,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HiggsField":
        doc = json.loads(text)
        if doc.get("format") != "higgsfield/v1":
            raise ValueError(f"unsupported field document format {doc.get('format')!r}")
        n, deg = doc["rank"], doc["degree"]
        c = np.zeros((n, n, deg + 1), dtype=complex)
        for i in range(n):
            for j in range(n):
                for k, (re, im) in enumerate(doc["coeffs"][i][j]):
                    c[i, j, k] = complex(re, im)
        return cls(n, c, doc["half_width"])


def evaluate(phi: HiggsField, z) -> np.ndarray:
    """Horner evaluation of all entries; z may be scalar or any array shape.

    Raises :class:`DomainError` if a point leaves the closed square.
    """
    z = np.asarray(z, dtype=complex)
    lim = phi.half_width * (1.0 + 1e-12)
    if np.any(np.abs(z.real) > lim) or np.any(np.abs(z.imag) > lim):
        raise DomainError(f"point outside the square of half-width {phi.half_width}")
    c = phi.coeffs
    out = np.broadcast_to(c[:, :, -1], z.shape + c.shape[:2]).copy()
    for k in range(c.shape[2] - 2, -1, -1):
        out = out * z[..., None, None] + c[:, :, k]
    return out


# ---------------------------------------------------------------------------
# critical set and certification


@dataclass(frozen=True)
class SpectralCertificate:
    """Gap/size certificate for a field on the unit disk.

    ``d`` is the infimum of the eigenvalue gap over D(1) (0 if a critical
    point meets the closed disk, inf when there is a single branch), ``A``
    bounds eigenvalue moduli by A·d, ``m`` is the generic number of
    eigenvalue clusters, and ``critical_points`` lists the branch-collision
    points inside the domain square.
    """

    d: float
    A: float
    m: int
    critical_points: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _cluster_count(mat: np.ndarray, tol_scale: float) -> int:
    lam = np.linalg.eigvals(mat)
    means, _ = cluster_points(lam, 1e-6 * tol_scale)
    return len(means)


def _distinct_values(lam: np.ndarray, tol: float) -> np.ndarray:
    means, _ = cluster_points(lam, tol)
    return means


def _collision_polynomial(phi: HiggsField, m: int, scale: float):
    """Coefficients of D(z) = Π_{a<b} (ν_a - ν_b)² over the m branch values.

    D is a single-valued polynomial in z (symmetric in the branches), so it
    can be recovered from samples on a circle by FFT interpolation.
    """
    if m == 1:
        return np.array([1.0 + 0j])
    n, dmax = phi.rank, phi.degree
    deg_bound = m * (m - 1) * max(dmax, 1) * n
    K = 1 << max(6, int(np.ceil(np.log2(4 * deg_bound + 8))))
    rho = phi.half_width * math.sqrt(2.0) * 1.05
    for attempt in range(6):
        theta = 2 * np.pi * np.arange(K) / K
        zs = rho * np.exp(1j * theta)
        vals = np.empty(K, dtype=complex)
        ok = True
        for k, z in enumerate(zs):
            lam = np.linalg.eigvals(_eval_nocheck(phi, z))
            nu = _distinct_values(lam, 1e-6 * scale)
            if len(nu) != m:
                ok = False
                break
            diff = nu[:, None] - nu[None, :]
            vals[k] = np.prod(diff[np.triu_indices(m, 1)] ** 2)
        if ok:
            break
        rho *= 1.03941
    else:
        raise DegenerateFamilyError("could not find a collision-free sampling circle")
    raw = np.fft.fft(vals) / K
    coeff = raw * rho ** (-np.arange(K, dtype=float))
    mag = np.abs(coeff)
    top = mag.max()
    if top == 0.0:
        raise DegenerateFamilyError("branch-collision polynomial vanished identically")
    keep = np.nonzero(mag > 1e-9 * top)[0]
    deg = int(keep.max()) if keep.size else 0
    return coeff[: deg + 1]


def _eval_nocheck(phi: HiggsField, z):
    c = phi.coeffs
    out = c[:, :, -1].copy()
    for k in range(c.shape[2] - 2, -1, -1):
        out = out * z + c[:, :, k]
    return out


def _polish_roots(coeff_asc: np.ndarray, roots: np.ndarray, iters: int = 6) -> np.ndarray:
    dcoeff = coeff_asc[1:] * np.arange(1, len(coeff_asc))
    out = roots.astype(complex)
    for _ in range(iters):
        p = np.polynomial.polynomial.polyval(out, coeff_asc)
        dp = np.polynomial.polynomial.polyval(out, dcoeff)
        step = np.where(np.abs(dp) > 0, p / np.where(dp == 0, 1, dp), 0.0)
        out = out - step
    return out


def critical_set(phi: HiggsField, grid_samples: int = 41, disk_samples: int = 61) -> SpectralCertificate:
    """Locate branch collisions and measure the gap/size data on D(1).

    The generic cluster count m is the maximum over a dense sample grid; the
    collision points are the in-domain roots of the branch-collision
    polynomial, Newton-polished.  d and A are measured over D(1): d = 0 if a
    collision point meets the closed unit disk, d = inf when m = 1.
    """
    L = phi.half_width
    xs = np.linspace(-L, L, grid_samples)
    scale = 1.0
    samples = [complex(x, y) for x in xs for y in xs]
    lam_samples = {}
    m = 1
    for z in samples:
        lam = np.linalg.eigvals(_eval_nocheck(phi, z))
        lam_samples[z] = lam
        scale = max(scale, 1.0 + float(np.max(np.abs(lam))))
        m = max(m, len(_distinct_values(lam, 1e-6 * scale)))

    coeff = _collision_polynomial(phi, m, scale)
    if len(coeff) > 1:
        rts = np.polynomial.polynomial.polyroots(coeff)
        rts = _polish_roots(coeff, rts)
        inside = (np.abs(rts.real) <= L + 1e-9) & (np.abs(rts.imag) <= L + 1e-9)
        crit = rts[inside]
    else:
        crit = np.array([], dtype=complex)

    # rank of the nilpotent part can jump without m changing; record, don't classify
    jumps = []
    if m >= 1:
        prev_rank = None
        for z in samples[:: max(1, len(samples) // 200)]:
            mat = _eval_nocheck(phi, z)
            lam = lam_samples[z]
            means = _distinct_values(lam, 1e-6 * scale)
            if len(means) != m:
                continue
            fs = np.zeros_like(mat)
            fn_rank = _nilpotent_rank(mat, means)
            if prev_rank is not None and fn_rank != prev_rank:
                jumps.append(complex(z))
            prev_rank = fn_rank

    d, A = _gap_on_unit_disk(phi, crit, m, scale, disk_samples)
    return SpectralCertificate(
        d=d,
        A=A,
        m=m,
        critical_points=np.sort_complex(crit),
        diagnostics={"jordan_rank_jumps": jumps},
    )


def _nilpotent_rank(mat: np.ndarray, means: np.ndarray) -> int:
    # only the rank is recorded; near-critical warnings are irrelevant here
    import warnings as _warnings

    from .linalg import jordan_chevalley

    try:
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            parts = jordan_chevalley(mat)
    except Exception:
        return -1
    s = np.linalg.svd(parts.nilpotent, compute_uv=False)
    return int(np.sum(s > 1e-6 * max(1.0, s[0])))


def _gap_on_unit_disk(phi, crit, m, scale, disk_samples):
    if crit.size and np.min(np.abs(crit)) <= 1.0 + 1e-9:
        return 0.0, 0.0
    if m == 1:
        return math.inf, 0.0
    xs = np.linspace(-1.0, 1.0, disk_samples)
    pts = [complex(x, y) for x in xs for y in xs if x * x + y * y <= 1.0]
    pts += [np.exp(1j * t) for t in np.linspace(0, 2 * np.pi, 4 * disk_samples, endpoint=False)]
    d = math.inf
    lam_max = 0.0
    for z in pts:
        lam = np.linalg.eigvals(_eval_nocheck(phi, z))
        nu = _distinct_values(lam, 1e-6 * scale)
        lam_max = max(lam_max, float(np.max(np.abs(lam))))
        if len(nu) >= 2:
            diffs = np.abs(nu[:, None] - nu[None, :])
            np.fill_diagonal(diffs, np.inf)
            d = min(d, float(diffs.min()))
    A = lam_max / d if d > 0 and np.isfinite(d) else 0.0
    return d, A


def certify_S(phi: HiggsField, R: float = 1.0, base: SpectralCertificate | None = None) -> SpectralCertificate:
    """Certificate for the scaled field R·f: gap scales to R·d, A is unchanged.

    Raises :class:`NotCertifiableError` if a collision point meets the closed
    unit disk.
    """
    cert = base if base is not None else critical_set(phi)
    if cert.critical_points.size and np.min(np.abs(cert.critical_points)) <= 1.0 + 1e-9:
        raise NotCertifiableError(
            "critical point inside the closed unit disk; gap certificate unavailable"
        )
    return SpectralCertificate(
        d=cert.d * R if np.isfinite(cert.d) else cert.d,
        A=cert.A,
        m=cert.m,
        critical_points=cert.critical_points,
        diagnostics=dict(cert.diagnostics),
    )


# ---------------------------------------------------------------------------
# paths and branch continuation


@dataclass(frozen=True)
class PathSpec:
    """Sampled path γ: [0,1] → C with parameter values and velocities."""

    s: np.ndarray
    samples: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        z = np.asarray(self.samples, dtype=complex)
        dz = np.asarray(self.derivs, dtype=complex)
        if not (len(s) == len(z) == len(dz)):
            raise ValueError("s, samples, derivs must have equal length")
        if s[0] != 0.0 or abs(s[-1] - 1.0) > 1e-12 or np.any(np.diff(s) <= 0):
            raise ValueError("parameters must increase from 0 to 1")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "samples", z)
        object.__setattr__(self, "derivs", dz)

    @classmethod
    def line(cls, z0: complex, z1: complex, num: int = 201) -> "PathSpec":
        s = np.linspace(0.0, 1.0, num)
        return cls(s, z0 + (z1 - z0) * s, np.full(num, z1 - z0, dtype=complex))

    @classmethod
    def circle(cls, center: complex, radius: float, num: int = 401, turns: float = 1.0) -> "PathSpec":
        s = np.linspace(0.0, 1.0, num)
        w = 2j * np.pi * turns
        z = center + radius * np.exp(w * s)
        return cls(s, z, radius * w * np.exp(w * s))

    @classmethod
    def from_callable(cls, gamma, dgamma, num: int = 201) -> "PathSpec":
        s = np.linspace(0.0, 1.0, num)
        return cls(s, np.array([gamma(t) for t in s]), np.array([dgamma(t) for t in s]))

    def reversed(self) -> "PathSpec":
        return PathSpec(
            1.0 - self.s[::-1], self.samples[::-1].copy(), -self.derivs[::-1]
        )

    def refined(self, factor: int = 2) -> "PathSpec":
        """Linear refinement of the sample sequence (parameters included)."""
        s = self.s
        snew = [s[0]]
        for a, b in zip(s[:-1], s[1:]):
            snew.extend(np.linspace(a, b, factor + 1)[1:])
        snew = np.array(snew)
        z = np.interp(snew, s, self.samples.real) + 1j * np.interp(snew, s, self.samples.imag)
        dz = np.interp(snew, s, self.derivs.real) + 1j * np.interp(snew, s, self.derivs.imag)
        return PathSpec(snew, z, dz)

    @property
    def length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.samples))))

    def is_closed(self, tol: float = 1e-12) -> bool:
        return abs(self.samples[0] - self.samples[-1]) <= tol


@dataclass(frozen=True)
class BranchTracks:
    """Labeled eigenvalue branches along a path.

    ``tracks`` has shape (m, K): cluster representatives at each sample;
    ``multiplicities`` their algebraic multiplicities (constant along a
    non-critical path); ``monodromy`` is the label permutation after one
    circuit when the path is closed, else the identity.
    """

    path: PathSpec
    tracks: np.ndarray
    multiplicities: tuple
    verdict: bool
    margin: float
    monodromy: tuple

    def expanded(self) -> np.ndarray:
        """(n, K) array with each track repeated by its multiplicity."""
        rows = []
        for t, mult in zip(self.tracks, self.multiplicities):
            rows.extend([t] * mult)
        return np.array(rows)


def branch_continuation(phi: HiggsField, gamma: PathSpec, margin: float | None = None) -> BranchTracks:
    """Continue eigenvalue clusters along γ by nearest-neighbour matching.

    The non-criticality verdict is true iff for every pair of tracks that are
    not identical along the whole path, |Re(λ_i γ') − Re(λ_j γ')| stays above
    the margin (default 1e-6 · max|λ| · max|γ'|) at every sample.
    """
    zs, dzs = gamma.samples, gamma.derivs
    K = len(zs)
    lam0 = np.linalg.eigvals(_eval_nocheck(phi, zs[0]))
    scale = 1.0 + float(np.max(np.abs(lam0)))
    means, groups = cluster_points(lam0, 1e-6 * scale)
    m = len(means)
    mults = tuple(len(g) for g in groups)
    tracks = np.empty((m, K), dtype=complex)
    tracks[:, 0] = means
    for k in range(1, K):
        lam = np.linalg.eigvals(_eval_nocheck(phi, zs[k]))
        nu, grs = cluster_points(lam, 1e-6 * scale)
        if len(nu) != m:
            raise PathTooCoarseError(
                f"cluster count changed from {m} to {len(nu)} at s={gamma.s[k]:.4g}; "
                "the path passes too close to a collision point"
            )
        cost = np.abs(tracks[:, k - 1][:, None] - nu[None, :])
        rows, cols = linear_sum_assignment(cost)
        order = np.empty(m, dtype=int)
        order[rows] = cols
        for i in rows:
            d1 = cost[i, order[i]]
            others = np.delete(cost[i], order[i])
            if others.size and d1 > 0.25 * others.min() and d1 > 1e-12 * scale:
                raise PathTooCoarseError(
                    f"ambiguous branch matching at s={gamma.s[k]:.4g} "
                    f"(moved {d1:.3e}, next candidate at {others.min():.3e}); refine the path"
                )
        new_mults = tuple(len(grs[c]) for c in order)
        if new_mults != mults:
            raise PathTooCoarseError(
                f"cluster multiplicities changed {mults} -> {new_mults} at s={gamma.s[k]:.4g}"
            )
        tracks[:, k] = nu[order]

    if margin is None:
        margin = 1e-6 * float(np.max(np.abs(tracks))) * float(np.max(np.abs(dzs)))
    verdict = True
    for i in range(m):
        for j in range(i + 1, m):
            if np.max(np.abs(tracks[i] - tracks[j])) <= 1e-10 * scale:
                continue  # identical branches are exempt
            sep = np.abs(np.real(tracks[i] * dzs) - np.real(tracks[j] * dzs))
            if np.min(sep) <= margin:
                verdict = False

    monodromy = tuple(range(m))
    if gamma.is_closed(1e-10):
        cost = np.abs(tracks[:, -1][:, None] - tracks[:, 0][None, :])
        rows, cols = linear_sum_assignment(cost)
        perm = np.empty(m, dtype=int)
        perm[rows] = cols
        monodromy = tuple(int(p) for p in perm)

    return BranchTracks(
        path=gamma,
        tracks=tracks,
        multiplicities=mults,
        verdict=verdict,
        margin=float(margin),
        monodromy=monodromy,
    )


def alpha_integrals(
    phi: HiggsField,
    gamma: PathSpec,
    tracks: BranchTracks | None = None,
    require_noncritical: bool = True,
) -> np.ndarray:
    """Sorted (descending) list of -∫ Re(λ_i γ') ds, multiplicities repeated.

    Uses composite Simpson quadrature on the path samples; requires a true
    non-criticality verdict unless ``require_noncritical`` is disabled (the
    integrals themselves exist regardless, e.g. for purely imaginary
    branches along a real path, where the verdict is necessarily false).
    """
    if tracks is None:
        tracks = branch_continuation(phi, gamma)
    if require_noncritical and not tracks.verdict:
        raise NonCriticalPathError("path fails the non-criticality condition")
    out = []
    for t, mult in zip(tracks.tracks, tracks.multiplicities):
        val = -simpson(np.real(t * gamma.derivs), x=gamma.s)
        out.extend([val] * mult)
    return np.sort(np.array(out))[::-1]

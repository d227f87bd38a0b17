"""Pointwise complex linear algebra over a Hermitian inner product.

Adjoints, Schur and Jordan-Chevalley decompositions, eigenprojections,
almost-orthogonality measures, and Weyl-chamber vector distances.  All
operations are pure functions on immutable values and safe to call
concurrently.

Conventions
-----------
A Hermitian form with Gram matrix ``G`` pairs vectors as ``h(u, v) = u† G v``
(conjugate-linear in the first slot).  The adjoint of an endomorphism ``f``
is ``f* = G⁻¹ f† G``, and the Hilbert-Schmidt norm is
``|f|ₕ² = tr(f f*)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ClusteringError, ConditioningError, ContractViolationError

__all__ = [
    "HermitianForm",
    "SchurParts",
    "JordanChevalleyParts",
    "VectorDistance",
    "OrthogonalityDefects",
    "CommutatorNorms",
    "NearCriticalWarning",
    "adjoint",
    "hs_inner",
    "hs_norm",
    "cluster_points",
    "schur_decompose",
    "jordan_chevalley",
    "orthogonality_defect",
    "vector_distance",
    "commutator_norms",
]

#: eigenvalues closer than CLUSTER_RTOL * (1 + max|λ|) are one cluster;
#: a defective pair computed from a non-triangular representation scatters
#: like sqrt(machine eps)·scale ≈ 1.5e-8, so the threshold sits above that
CLUSTER_RTOL = 2e-7

#: singular values below SVD_RTOL * σ_max count as zero in rank decisions
SVD_RTOL = 1e-10

#: Gram matrices with condition number above this are rejected
COND_LIMIT = 1e12


class NearCriticalWarning(UserWarning):
    """Distinct eigenvalue clusters are uncomfortably close."""


@dataclass(frozen=True)
class HermitianForm:
    """A positive-definite Hermitian inner product on C^dim."""

    dim: int
    gram: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=complex)
        if g.shape != (self.dim, self.dim):
            raise ValueError(f"gram must be {self.dim}x{self.dim}, got {g.shape}")
        scale = np.linalg.norm(g)
        if np.linalg.norm(g - g.conj().T) > 1e-12 * max(scale, 1.0):
            raise ValueError("gram is not Hermitian to 1e-12 relative accuracy")
        object.__setattr__(self, "gram", 0.5 * (g + g.conj().T))
        w = np.linalg.eigvalsh(self.gram)
        if w[0] <= 0:
            raise ValueError(f"gram is not positive definite (min eigenvalue {w[0]:.3e})")

    @classmethod
    def identity(cls, dim: int) -> "HermitianForm":
        return cls(dim, np.eye(dim, dtype=complex))

    def cholesky(self) -> np.ndarray:
        """Lower-triangular L with gram = L L†."""
        return np.linalg.cholesky(self.gram)

    def norm(self, v: np.ndarray) -> float:
        """Length of a vector."""
        return float(np.sqrt(np.real(v.conj() @ self.gram @ v)))

    def pair(self, u: np.ndarray, v: np.ndarray) -> complex:
        """h(u, v), conjugate-linear in u."""
        return complex(u.conj() @ self.gram @ v)


def adjoint(f: np.ndarray, h: HermitianForm) -> np.ndarray:
    """Adjoint of ``f`` with respect to ``h``: satisfies h(fu, v) = h(u, f*v)."""
    cond = np.linalg.cond(h.gram)
    if cond > COND_LIMIT:
        raise ConditioningError(f"gram condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return np.linalg.solve(h.gram, f.conj().T @ h.gram)


def hs_inner(a: np.ndarray, b: np.ndarray, h: HermitianForm) -> complex:
    """Hilbert-Schmidt pairing tr(a · b*)."""
    return complex(np.trace(a @ adjoint(b, h)))


def hs_norm(f: np.ndarray, h: HermitianForm | None = None) -> float:
    """Hilbert-Schmidt norm of an endomorphism, w.r.t. ``h`` (Frobenius if None)."""
    if h is None:
        return float(np.linalg.norm(f))
    val = np.real(np.trace(f @ adjoint(f, h)))
    return float(np.sqrt(max(val, 0.0)))


def cluster_points(values: np.ndarray, tol: float | None = None):
    """Single-linkage clustering of points in the complex plane.

    Returns ``(means, groups)`` where groups are index arrays and clusters are
    sorted by (Re, Im) of their means.  ``tol`` defaults to
    ``CLUSTER_RTOL * (1 + max|values|)``.
    """
    values = np.asarray(values, dtype=complex)
    k = len(values)
    if tol is None:
        tol = CLUSTER_RTOL * (1.0 + float(np.max(np.abs(values))) if k else 1.0)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    idx_groups = [np.array(g) for g in groups.values()]
    means = np.array([values[g].mean() for g in idx_groups])
    order = np.lexsort((means.imag, means.real))
    return means[order], [idx_groups[i] for i in order]


def _cluster_gaps(values: np.ndarray, means: np.ndarray, groups, tol: float):
    """(largest intra-cluster spread, smallest inter-cluster distance)."""
    inner = 0.0
    for g in groups:
        if len(g) > 1:
            vs = values[g]
            inner = max(inner, float(np.max(np.abs(vs[:, None] - vs[None, :]))))
    outer = np.inf
    m = len(means)
    for i in range(m):
        for j in range(i + 1, m):
            outer = min(outer, abs(means[i] - means[j]))
    return inner, outer


@dataclass(frozen=True)
class SchurParts:
    """Triangular split f = diag_part + upper_part in an h-orthonormal basis.

    ``basis`` columns are h-orthonormal and weakly triangularize f; both parts
    are expressed back in the original frame.  ``ordering`` records the cluster
    permutation that was used.
    """

    diag_part: np.ndarray
    upper_part: np.ndarray
    basis: np.ndarray
    ordering: tuple[int, ...]

    @property
    def f(self) -> np.ndarray:
        return self.diag_part + self.upper_part


def _eigenvector(b: np.ndarray, lam: complex) -> np.ndarray:
    """Best normalized solution of (b - lam I)v ≈ 0 (smallest singular vector).

    One vector suffices: the Schur construction deflates a single column per
    stage, and the reconstruction invariant catches a bad basis downstream.
    """
    m = b - lam * np.eye(b.shape[0])
    _, _, vh = np.linalg.svd(m)
    return vh[-1:].conj().T


def schur_decompose(f: np.ndarray, h: HermitianForm, ordering=None) -> SchurParts:
    """Split f into diagonal and strictly-upper parts in an h-orthonormal basis.

    The basis is built by peeling eigenspaces: take the eigenspace of the
    first cluster, pass to its h-orthogonal complement, and recurse; clusters
    are consumed in ``ordering`` (a permutation of the canonically sorted
    eigenvalue clusters; identity if omitted).

    Raises
    ------
    ClusteringError
        If two eigenvalues sit so close to the clustering threshold that the
        cluster count is ambiguous.
    """
    f = np.asarray(f, dtype=complex)
    n = f.shape[0]
    lam = np.linalg.eigvals(f)
    scale = 1.0 + float(np.max(np.abs(lam)))
    tol = CLUSTER_RTOL * scale
    means, groups = cluster_points(lam, tol)
    means3, _ = cluster_points(lam, 3.0 * tol)
    if len(means3) != len(means):
        inner, outer = _cluster_gaps(lam, means, groups, tol)
        raise ClusteringError(
            f"eigenvalue clustering ambiguous: intra-cluster spread {inner:.3e}, "
            f"inter-cluster gap {outer:.3e} at tolerance {tol:.3e}",
            inner_gap=inner,
            outer_gap=outer,
        )
    m = len(means)
    if ordering is None:
        ordering = tuple(range(m))
    if sorted(ordering) != list(range(m)):
        raise ValueError(f"ordering must be a permutation of 0..{m - 1}")
    counts = {i: len(groups[i]) for i in range(m)}

    # W holds an h-orthonormal basis of the remaining complement; b is the
    # compression of f to it (h is the standard inner product in W-coords).
    L = h.cholesky()
    W = np.linalg.inv(L.conj().T)
    b = L.conj().T @ f @ W  # == W^{-1} f W since W = L^{-†}
    cols = []
    for ci in ordering:
        lam_c = means[ci]
        for _ in range(counts[ci]):
            # one Jordan stage at a time keeps the triangularization weakly upper
            e1 = _eigenvector(b, lam_c)
            cols.append(W @ e1)
            q, _ = np.linalg.qr(np.hstack([e1, np.eye(b.shape[0])]))
            Fc = q[:, 1: b.shape[0]]
            W = W @ Fc
            b = Fc.conj().T @ b @ Fc
            if b.size == 0:
                break
    Q = np.hstack(cols)
    Qinv = Q.conj().T @ h.gram
    T = Qinv @ f @ Q
    f_a = Q @ np.diag(np.diag(T)) @ Qinv
    f_u = Q @ np.triu(T, 1) @ Qinv
    return SchurParts(diag_part=f_a, upper_part=f_u, basis=Q, ordering=tuple(ordering))


@dataclass(frozen=True)
class JordanChevalleyParts:
    """The unique split f = semisimple + nilpotent into commuting parts.

    ``projections[i]`` is the (generally oblique) projection onto the i-th
    generalized eigenspace, and ``eigenvalues[i] = (value, multiplicity)``.
    """

    semisimple: np.ndarray
    nilpotent: np.ndarray
    projections: list = field(default_factory=list)
    eigenvalues: list = field(default_factory=list)

    @property
    def f(self) -> np.ndarray:
        return self.semisimple + self.nilpotent

    @property
    def cluster_count(self) -> int:
        return len(self.eigenvalues)


def jordan_chevalley(
    f: np.ndarray,
    cluster_tol: float | None = None,
    gap_warn: float = 1e-4,
) -> JordanChevalleyParts:
    """Jordan-Chevalley decomposition of a square complex matrix.

    Generalized eigenspaces are kernels of ``(f - λI)^k`` with rank decided by
    a relative singular-value threshold; ``k`` is the algebraic multiplicity
    of the cluster.  Emits :class:`NearCriticalWarning` when distinct clusters
    are closer than ``gap_warn * (1 + max|λ|)``.
    """
    f = np.asarray(f, dtype=complex)
    n = f.shape[0]
    lam = np.linalg.eigvals(f)
    scale = 1.0 + float(np.max(np.abs(lam)))
    means, groups = cluster_points(lam, cluster_tol)
    m = len(means)
    if m > 1:
        gaps = np.abs(means[:, None] - means[None, :])
        np.fill_diagonal(gaps, np.inf)
        gmin = float(gaps.min())
        if gmin < gap_warn * scale:
            warnings.warn(
                f"eigenvalue clusters separated by only {gmin:.3e}; "
                "the decomposition is near-critical",
                NearCriticalWarning,
                stacklevel=2,
            )
    if m == 1:
        lam0 = means[0]
        fs = lam0 * np.eye(n, dtype=complex)
        return JordanChevalleyParts(
            semisimple=fs,
            nilpotent=f - fs,
            projections=[np.eye(n, dtype=complex)],
            eigenvalues=[(complex(lam0), n)],
        )
    blocks = []
    for mean, g in zip(means, groups):
        k = len(g)
        power = np.linalg.matrix_power(f - mean * np.eye(n), k)
        _, s, vh = np.linalg.svd(power)
        rank = int(np.sum(s > SVD_RTOL * s[0]))
        if n - rank != k:
            raise ClusteringError(
                f"generalized eigenspace for λ={mean:.6g} has numerical dimension "
                f"{n - rank}, expected multiplicity {k}"
            )
        blocks.append(vh[rank:].conj().T)
    V = np.hstack(blocks)
    Vinv = np.linalg.inv(V)
    projections = []
    start = 0
    for blk in blocks:
        k = blk.shape[1]
        projections.append(V[:, start:start + k] @ Vinv[start:start + k, :])
        start += k
    fs = sum(mu * p for mu, p in zip(means, projections))
    return JordanChevalleyParts(
        semisimple=fs,
        nilpotent=f - fs,
        projections=projections,
        eigenvalues=[(complex(mu), len(g)) for mu, g in zip(means, groups)],
    )


@dataclass(frozen=True)
class OrthogonalityDefects:
    """Per-projection distances to the h-orthogonal projections.

    ``defects[i] = |π_i − π_i'|ₕ`` via the trace formula sqrt(|π|ₕ² − tr π);
    ``star_defects[i] = |π_i − π_i*|ₕ / √2`` is the equivalent adjoint form.
    """

    defects: np.ndarray
    star_defects: np.ndarray


def orthogonality_defect(projections, h: HermitianForm) -> OrthogonalityDefects:
    """Distance of each (possibly oblique) projection from its orthogonal version.

    Inputs must be idempotent; both equivalent formulas are evaluated and
    must agree to 1e-10.
    """
    defects, stars = [], []
    for p in projections:
        p = np.asarray(p, dtype=complex)
        scale = max(1.0, float(np.linalg.norm(p)))
        if np.linalg.norm(p @ p - p) > 1e-8 * scale:
            raise ContractViolationError("input is not idempotent: π² != π")
        ps = adjoint(p, h)
        n2 = np.real(np.trace(p @ ps))
        d = float(np.sqrt(max(n2 - np.real(np.trace(p)), 0.0)))
        d_star = hs_norm(p - ps, h) / np.sqrt(2.0)
        if abs(d - d_star) > 1e-10 * (1.0 + d):
            raise ContractViolationError(
                f"trace and adjoint defect formulas disagree: {d:.3e} vs {d_star:.3e}"
            )
        defects.append(d)
        stars.append(d_star)
    return OrthogonalityDefects(np.array(defects), np.array(stars))


@dataclass(frozen=True)
class VectorDistance:
    """Weyl-chamber valued distance between two Hermitian forms.

    ``kappas`` are the sorted (descending) logarithmic stretches of a basis
    that diagonalizes both forms simultaneously.
    """

    kappas: np.ndarray

    def __neg__(self) -> "VectorDistance":
        return VectorDistance(np.sort(-self.kappas)[::-1])


def vector_distance(h1: HermitianForm, h2: HermitianForm) -> VectorDistance:
    """d(h1, h2): κ_i = -1/2 log μ_i with μ_i the eigenvalues of gram1⁻¹ gram2."""
    if h1.dim != h2.dim:
        raise ValueError(f"dimension mismatch: {h1.dim} vs {h2.dim}")
    mu = scipy.linalg.eigh(h2.gram, h1.gram, eigvals_only=True)
    kappas = np.sort(-0.5 * np.log(mu))[::-1]
    return VectorDistance(kappas)


@dataclass(frozen=True)
class CommutatorNorms:
    """h-norms of the commutators between the Jordan-Chevalley parts and their adjoints."""

    ss: float  # |[f_s, f_s*]|
    ns: float  # |[f_n, f_s*]|
    sn: float  # |[f_s, f_n*]|
    total: float  # |[f, f*]|

    def as_dict(self) -> dict:
        return {"ss": self.ss, "ns": self.ns, "sn": self.sn, "total": self.total}


def commutator_norms(f: np.ndarray, h: HermitianForm) -> CommutatorNorms:
    """Mixed commutator norms of the semisimple/nilpotent parts of f."""
    parts = jordan_chevalley(f)
    fs, fn = parts.semisimple, parts.nilpotent
    fs_star, fn_star = adjoint(fs, h), adjoint(fn, h)
    f_star = adjoint(np.asarray(f, dtype=complex), h)
    comm = lambda a, b: a @ b - b @ a
    return CommutatorNorms(
        ss=hs_norm(comm(fs, fs_star), h),
        ns=hs_norm(comm(fn, fs_star), h),
        sn=hs_norm(comm(fs, fn_star), h),
        total=hs_norm(comm(np.asarray(f, dtype=complex), f_star), h),
    )

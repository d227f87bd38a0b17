"""Square grids and Hermitian metric fields on them."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Grid:
    """Uniform (N x N) grid on the square [-L, L]²; the unit disk must fit strictly inside."""

    half_width: float = 1.2
    points_per_side: int = 129

    def __post_init__(self):
        if self.half_width <= 1.0:
            raise ValueError("half_width must exceed 1 so that D(1) is strictly inside")
        n = self.points_per_side
        if n < 5 or n % 2 == 0:
            raise ValueError("points_per_side must be an odd integer >= 5")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_side - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.points_per_side)

    @property
    def nodes(self) -> np.ndarray:
        """Complex coordinates, indexed [ix, iy]."""
        x = self.axis
        return x[:, None] + 1j * x[None, :]

    def disk_mask(self, radius: float) -> np.ndarray:
        return np.abs(self.nodes) <= radius

    def interior_mask(self) -> np.ndarray:
        m = np.zeros((self.points_per_side,) * 2, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def locate(self, z: complex):
        """Bilinear cell index and weights for a point; raises if outside."""
        L, h, n = self.half_width, self.spacing, self.points_per_side
        x, y = float(np.real(z)), float(np.imag(z))
        if abs(x) > L or abs(y) > L:
            raise DomainError(f"point {z} outside the grid square")
        fx = min((x + L) / h, n - 1 - 1e-12)
        fy = min((y + L) / h, n - 1 - 1e-12)
        i, j = int(fx), int(fy)
        return i, j, fx - i, fy - j


@dataclass
class MetricField:
    """Positive-definite Hermitian matrices H on the nodes of a grid.

    ``values[i, j]`` is H at node (x_i, y_j); ``log_coords`` holds the
    Hermitian logarithm S with H = exp(S).  Boundary nodes carry the Dirichlet
    data of the solve that produced the field (identity by default).
    Completed fields are immutable by convention and safe to share.
    """

    grid: Grid
    values: np.ndarray
    log_coords: np.ndarray
    R: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def identity(cls, grid: Grid, rank: int, R: float = 0.0) -> "MetricField":
        n = grid.points_per_side
        H = np.broadcast_to(np.eye(rank, dtype=complex), (n, n, rank, rank)).copy()
        return cls(grid, H, np.zeros_like(H), R=R)

    def interpolate(self, z: complex) -> np.ndarray:
        """Bilinear interpolation of H at a point (stays positive definite)."""
        i, j, tx, ty = self.grid.locate(z)
        v = self.values
        return (
            (1 - tx) * (1 - ty) * v[i, j]
            + tx * (1 - ty) * v[i + 1, j]
            + (1 - tx) * ty * v[i, j + 1]
            + tx * ty * v[i + 1, j + 1]
        )

    def det_field(self) -> np.ndarray:
        return np.linalg.det(self.values).real

    def validate(self, boundary=None, atol: float = 1e-10) -> None:
        """Check Hermitian positive-definiteness and the boundary data."""
        v = self.values
        if np.max(np.abs(v - v.conj().swapaxes(-1, -2))) > atol * (1 + np.max(np.abs(v))):
            raise ValueError("metric field is not Hermitian")
        w = np.linalg.eigvalsh(v)
        if w.min() <= 0:
            raise ValueError("metric field is not positive definite")
        if boundary is not None:
            ns = self.grid.points_per_side
            idx = np.zeros((ns, ns), dtype=bool)
            idx[0] = idx[-1] = True
            idx[:, 0] = idx[:, -1] = True
            zb = self.grid.nodes[idx]
            hb = np.stack([boundary(z) for z in zb])
            if np.max(np.abs(v[idx] - hb)) > atol * (1 + np.max(np.abs(hb))):
                raise ValueError("boundary nodes do not match the Dirichlet data")

    # -- checkpoint io (metric-checkpoint/v1) -------------------------------

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            format_version=np.int64(CHECKPOINT_VERSION),
            half_width=np.float64(self.grid.half_width),
            points_per_side=np.int64(self.grid.points_per_side),
            rank=np.int64(self.rank),
            R=np.float64(self.R),
            values=self.values,
            log_coords=self.log_coords,
        )

    @classmethod
    def load(cls, path) -> "MetricField":
        with np.load(path) as data:
            version = int(data["format_version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            grid = Grid(float(data["half_width"]), int(data["points_per_side"]))
            return cls(
                grid,
                np.array(data["values"]),
                np.array(data["log_coords"]),
                R=float(data["R"]),
            )

    def conjugated(self, g: np.ndarray) -> "MetricField":
        """Gram transform under a constant unitary change of trivialization e -> e·g."""
        gh = g.conj().T
        if np.max(np.abs(gh @ g - np.eye(g.shape[0]))) > 1e-12:
            raise ValueError("trivialization change must be unitary")
        vals = np.einsum("ij,xyjk,kl->xyil", gh, self.values, g)
        logc = np.einsum("ij,xyjk,kl->xyil", gh, self.log_coords, g)
        return MetricField(self.grid, vals, logc, R=self.R, meta=dict(self.meta))

import math

import numpy as np
import pytest

from higgslab import Grid, HiggsField, SolverConfig
from higgslab.solver import radial_oracle, solve_ray


def liouville_exact(R, rb, r):
    """Closed-form radial solution of (u'' + u'/r)/4 = R² e^{2u}, u(rb) = 0."""
    a = (1.0 + math.sqrt(1.0 + 4.0 * R * R * rb * rb)) / (2.0 * R)
    return np.log(a / (R * (a * a - np.asarray(r, dtype=float) ** 2)))


def semisimple_field():
    return HiggsField.constant([[1, 1], [0, -1]])


def nilpotent_field():
    return HiggsField.constant([[0, 1], [0, 0]])


def diagonal_field():
    return HiggsField.constant([[1, 0], [0, -1]])


def block_mixed_field():
    m = np.diag([-1 / 3, -1 / 3, 2 / 3]).astype(complex)
    m[0, 1] = 1.0
    return HiggsField.constant(m)


def oblique_mixed_field():
    m = np.diag([-1 / 3, -1 / 3, 2 / 3]).astype(complex)
    m[0, 1] = 1.0
    m[0, 2] = 1.0
    return HiggsField.constant(m)


def oracle_boundary(rb):
    """Dirichlet data matched to the radial profile (identity in the R -> 0 limit)."""
    cache = {}

    def boundary(z, R):
        if R <= 0:
            return np.eye(2, dtype=complex)
        key = round(float(R), 12)
        if key not in cache:
            cache[key] = radial_oracle(key, rb)
        u = float(cache[key](abs(z)))
        return np.diag([math.exp(u), math.exp(-u)]).astype(complex)

    return boundary


@pytest.fixture(scope="session")
def semisimple_ladder65():
    """Warm-started ray for the generically semisimple 2x2 field on N=65."""
    grid = Grid(1.2, 65)
    targets = [1, 2, 3, 4, 5, 6, 8, 16, 32]
    metrics, reports = solve_ray(semisimple_field(), targets, grid, SolverConfig())
    return grid, targets, metrics, reports


@pytest.fixture(scope="session")
def nilpotent_ladder65():
    grid = Grid(1.2, 65)
    targets = [1, 2, 4, 8, 16, 32, 64]
    metrics, reports = solve_ray(nilpotent_field(), targets, grid, SolverConfig())
    return grid, targets, metrics, reports

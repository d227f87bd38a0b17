"""higgslab: a numerical laboratory for harmonic metrics along rays of Higgs fields.

Solves the self-duality equation for the Hermitian metric on a square grid,
measures decay/boundedness of the decoupling quantities across R-sweeps,
integrates flat-connection parallel transport for WKB asymptotics, and
compares pullback energy tensors with their toral counterparts.
"""

from .errors import HiggsLabError
from .fields import HiggsField, PathSpec, alpha_integrals, branch_continuation, certify_S, critical_set
from .grid import Grid, MetricField
from .linalg import (
    HermitianForm,
    adjoint,
    commutator_norms,
    hs_norm,
    jordan_chevalley,
    orthogonality_defect,
    schur_decompose,
    vector_distance,
)
from .solver import SolverConfig, SolveReport, chern_connection, curvature, hitchin_residual, radial_oracle, solve, solve_ray
from .transport import TransportReport, transport, wedge_log_norms, wkb_report

__version__ = "0.1.0"

__all__ = [
    "HiggsLabError",
    "HermitianForm",
    "HiggsField",
    "PathSpec",
    "Grid",
    "MetricField",
    "SolverConfig",
    "SolveReport",
    "adjoint",
    "alpha_integrals",
    "branch_continuation",
    "certify_S",
    "chern_connection",
    "commutator_norms",
    "critical_set",
    "curvature",
    "hitchin_residual",
    "hs_norm",
    "jordan_chevalley",
    "orthogonality_defect",
    "radial_oracle",
    "schur_decompose",
    "solve",
    "solve_ray",
    "transport",
    "TransportReport",
    "vector_distance",
    "wedge_log_norms",
    "wkb_report",
    "__version__",
]

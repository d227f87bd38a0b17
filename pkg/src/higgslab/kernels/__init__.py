"""Hot numerical kernels with a compiled core and a pure-NumPy fallback.

The compiled extension (``higgslab._core``, Cython) is used when it imported
successfully and the environment variable ``HIGGSLAB_FORCE_NUMPY`` is unset.
Both backends implement the same three entry points and agree to floating
point roundoff; ``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

from . import _numpy as _ref

_BACKENDS = {"numpy": _ref}
_ACTIVE = "numpy"

if not os.environ.get("HIGGSLAB_FORCE_NUMPY"):
    try:
        from .. import _core as _compiled  # type: ignore[attr-defined]

        _BACKENDS["compiled"] = _compiled
        _ACTIVE = "compiled"
    except ImportError:
        pass


def implementation() -> str:
    """Name of the backend currently in use ('compiled' or 'numpy')."""
    return _ACTIVE


def available_implementations() -> tuple:
    return tuple(sorted(_BACKENDS))


def set_implementation(name: str) -> None:
    """Select a backend explicitly (used by tests and benchmarks)."""
    global _ACTIVE
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_implementations()}")
    _ACTIVE = name


def expm_herm_pair(S):
    """exp(S) and exp(-S) for a stack of Hermitian matrices (..., n, n)."""
    return _BACKENDS[_ACTIVE].expm_herm_pair(S)


def residual_m(H, Hinv, F, rsq, h):
    """Hermitian-form residual M at interior nodes.

    M = 1/4 ΔH − ∂z̄H · H⁻¹ · ∂zH − rsq·(H F H⁻¹ F† H − F† H F), with centered
    second-order differences on spacing ``h`` for all derivatives.
    """
    return _BACKENDS[_ACTIVE].residual_m(H, Hinv, F, rsq, h)


def ordered_product(P):
    """Ordered product P[m-1] ··· P[1] P[0] with overflow renormalization.

    Returns ``(mat, logscale)`` with the true product equal to
    ``mat * exp(logscale)``.
    """
    return _BACKENDS[_ACTIVE].ordered_product(P)

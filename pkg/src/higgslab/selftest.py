"""Built-in verification battery for the CLI selftest subcommand.

Each check is a small, fast, self-contained assertion: the worked examples
for every operation plus the cheap invariant suites.  Heavy coupling sweeps
live in the pytest acceptance module, not here.
"""

from __future__ import annotations

import math

import numpy as np

from . import linalg as la
from .errors import NotCertifiableError
from .fields import HiggsField, PathSpec, alpha_integrals, branch_continuation, certify_S, critical_set, evaluate
from .grid import Grid, MetricField
from .measures import DecaySweep, fit_decay
from .solver import SolverConfig, hitchin_residual, radial_oracle, solve
from .transport import transport, wedge_log_norms, wkb_report

_CHECKS = []


def check(fn):
    _CHECKS.append(fn)
    return fn


def _close(a, b, tol=1e-10):
    assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol, (a, b)


# -- pointwise algebra -------------------------------------------------------


@check
def adjoint_examples():
    rng = np.random.default_rng(0)
    f = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    ident = la.HermitianForm.identity(3)
    _close(la.adjoint(f, ident), f.conj().T)
    herm = la.HermitianForm(2, np.diag([4.0, 1.0]))
    e12 = np.array([[0, 1], [0, 0]], dtype=complex)
    _close(la.adjoint(e12, herm), 4.0 * e12.T)
    sym = la.adjoint(f, ident) + f  # self-adjoint by construction
    _close(la.adjoint(sym, ident), sym)


@check
def schur_examples():
    ident = la.HermitianForm.identity(2)
    upper = np.array([[2.0, 5.0], [0.0, -1.0]], dtype=complex)
    # clusters sort to (-1, 2); ordering (1, 0) is compatible with the
    # existing triangular structure, so the split reads off directly
    parts = la.schur_decompose(upper, ident, ordering=(1, 0))
    _close(parts.diag_part, np.diag(np.diag(upper)))
    _close(parts.upper_part, upper - np.diag(np.diag(upper)))
    normal = np.array([[1.0, 1.0], [-1.0, 1.0]], dtype=complex)  # commutes with adjoint
    parts = la.schur_decompose(normal, ident)
    assert la.hs_norm(parts.upper_part, ident) < 1e-10
    f = np.array([[1.0, 1.0], [0.0, 0.0]], dtype=complex)
    parts = la.schur_decompose(f, ident)
    _close(la.hs_norm(parts.diag_part, ident) ** 2, 1.0)
    _close(la.hs_norm(parts.upper_part, ident) ** 2, 1.0)


@check
def jordan_chevalley_examples():
    f = np.array([[0, 1, 0], [0, 0, 1], [0, 0, 2]], dtype=complex)
    parts = la.jordan_chevalley(f)
    _close(parts.semisimple, [[0, 0, 0.5], [0, 0, 1], [0, 0, 2]])
    _close(parts.nilpotent, [[0, 1, -0.5], [0, 0, 0], [0, 0, 0]])
    strict = np.triu(np.ones((3, 3)), 1).astype(complex)
    parts = la.jordan_chevalley(strict)
    _close(parts.semisimple, 0.0)
    _close(parts.nilpotent, strict)
    f = np.array([[1, 1], [0, 2]], dtype=complex)
    parts = la.jordan_chevalley(f)
    _close(parts.projections[0], [[1, -1], [0, 0]])
    _close(parts.projections[1], [[0, 1], [0, 1]])
    _close(parts.nilpotent, 0.0)


@check
def orthogonality_examples():
    ident = la.HermitianForm.identity(2)
    _close(la.orthogonality_defect([np.diag([1.0, 0j])], ident).defects, [0.0])
    delta = 0.37
    pi = np.array([[0, delta], [0, 1]], dtype=complex)
    _close(la.orthogonality_defect([pi], ident).defects, [delta])
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        if abs(np.linalg.det(np.column_stack([v, w]))) < 0.3:
            continue
        V = np.column_stack([v, w])
        pi = V @ np.diag([1.0, 0.0]) @ np.linalg.inv(V)
        res = la.orthogonality_defect([pi], ident)
        _close(res.defects, res.star_defects, 1e-10)


@check
def vector_distance_examples():
    h1 = la.HermitianForm.identity(2)
    _close(la.vector_distance(h1, h1).kappas, [0.0, 0.0])
    h2 = la.HermitianForm(2, np.diag([math.exp(2.0), math.exp(-2.0)]))
    _close(la.vector_distance(h1, h2).kappas, [1.0, -1.0])
    fwd = la.vector_distance(h1, h2).kappas
    back = la.vector_distance(h2, h1).kappas
    _close(back, -fwd[::-1])


@check
def commutator_norm_examples():
    ident = la.HermitianForm.identity(2)
    rec = la.commutator_norms(np.diag([1.0, -1.0 + 0j]), ident)
    _close([rec.ss, rec.ns, rec.sn, rec.total], 0.0)
    rec = la.commutator_norms(np.array([[0, 1], [0, 0]], dtype=complex), ident)
    _close([rec.ss, rec.ns, rec.sn], 0.0)
    rec = la.commutator_norms(np.array([[1, 1], [0, -1]], dtype=complex), ident)
    _close(rec.ss, math.sqrt(10.0))  # [f, f†] = [[1,-2],[-2,-1]]
    _close(rec.sn, rec.ns)


# -- fields ------------------------------------------------------------------


def _swap_field():
    return HiggsField.from_entries([[[0], [0, 1]], [[1], [0]]])


@check
def evaluate_examples():
    phi = _swap_field()
    _close(evaluate(phi, 0.0), [[0, 0], [1, 0]])
    const = HiggsField.constant([[1, 2], [3, 4]])
    _close(evaluate(const, 0.3 + 0.4j), [[1, 2], [3, 4]])
    paper3 = HiggsField.from_entries(
        [[[0], [1], [0]], [[0], [0], [1]], [[0], [0], [0, 1]]], half_width=2.5
    )
    _close(evaluate(paper3, 2.0), [[0, 1, 0], [0, 0, 1], [0, 0, 2]])


@check
def critical_set_examples():
    cert = critical_set(_swap_field())
    assert cert.m == 2 and len(cert.critical_points) == 1
    _close(cert.critical_points, [0.0], 1e-8)
    cert = critical_set(HiggsField.constant([[0, 1], [0, 0]]))
    assert cert.m == 1 and len(cert.critical_points) == 0
    cert = critical_set(HiggsField.constant([[1, 0], [0, -1]]))
    assert cert.m == 2 and len(cert.critical_points) == 0
    _close(cert.d, 2.0, 1e-9)
    _close(cert.A, 0.5, 1e-9)


@check
def certify_examples():
    cert = certify_S(HiggsField.constant([[1, 0], [0, -1]]), R=8.0)
    _close(cert.d, 16.0, 1e-9)
    _close(cert.A, 0.5, 1e-9)
    try:
        certify_S(_swap_field())
        raise AssertionError("expected NotCertifiableError")
    except NotCertifiableError:
        pass
    m3 = np.diag([-1 / 3, -1 / 3, 2 / 3]).astype(complex)
    m3[0, 1] = 1.0
    mixed = HiggsField.constant(m3)
    cert = certify_S(mixed)
    assert cert.m == 2
    _close(cert.d, 1.0, 1e-9)
    _close(cert.A, 2 / 3, 1e-9)


@check
def branch_examples():
    diag = HiggsField.constant([[1, 0], [0, -1]])
    gamma = PathSpec.line(0.1, 0.7, 51)
    tracks = branch_continuation(diag, gamma)
    assert tracks.verdict
    _close(tracks.tracks[:, 0], tracks.tracks[:, -1])
    _close(np.sort(alpha_integrals(diag, gamma))[::-1], [0.6, -0.6], 1e-12)

    swap = _swap_field()
    gamma = PathSpec.from_callable(
        lambda s: np.exp(1j * np.pi * s / 4) * (1 + s) / 2,
        lambda s: (1j * np.pi / 4 * (1 + s) / 2 + 0.5) * np.exp(1j * np.pi * s / 4),
        101,
    )
    tracks = branch_continuation(swap, gamma)
    expect = np.sqrt(gamma.samples.astype(complex))
    got = tracks.tracks
    err = min(
        np.abs(got[0] - expect).max() + np.abs(got[1] + expect).max(),
        np.abs(got[0] + expect).max() + np.abs(got[1] - expect).max(),
    )
    assert err <= 1e-8
    loop = PathSpec.circle(0.0, 0.6, 401)
    tracks = branch_continuation(swap, loop)
    assert tracks.monodromy == (1, 0)


@check
def alpha_examples():
    imag = HiggsField.constant([[1j, 0], [0, -1j]])
    gamma = PathSpec.line(-0.5, 0.5, 41)
    # purely imaginary branches tie in Re along a real path, so the
    # non-criticality verdict is necessarily false; the integrals still vanish
    _close(alpha_integrals(imag, gamma, require_noncritical=False), [0.0, 0.0], 1e-12)
    diag = HiggsField.constant([[1, 0], [0, -1]])
    a_fwd = alpha_integrals(diag, gamma)
    a_rev = alpha_integrals(diag, gamma.reversed())
    _close(a_rev, -a_fwd[::-1], 1e-12)


# -- solver ------------------------------------------------------------------


@check
def residual_examples():
    grid = Grid(1.2, 17)
    diag = HiggsField.constant([[1, 0], [0, -1]])
    ident = MetricField.identity(grid, 2)
    _close(hitchin_residual(ident, diag, 3.0), 0.0, 1e-12)
    nil = HiggsField.constant([[0, 1], [0, 0]])
    K = hitchin_residual(ident, nil, 1.0)
    _close(K, np.broadcast_to(np.diag([-1.0, 1.0 + 0j]), K.shape), 1e-12)
    # R = 0 leaves the flat-metric expression; identity is flat
    _close(hitchin_residual(ident, nil, 0.0), 0.0, 1e-12)


@check
def radial_oracle_examples():
    prof = radial_oracle(1e-3, 1.0)
    assert abs(prof.u0) < 1e-2
    p1 = radial_oracle(1.0, 1.0)
    rr = np.linspace(0, 1, 30)
    u = p1(rr)
    assert np.all(u <= 1e-12) and np.all(np.diff(u) >= -1e-12)
    assert np.max(np.exp(2 * u)) <= 1.0 + 1e-12
    p2 = radial_oracle(2.0, 1.0)
    assert p2.u0 < p1.u0


@check
def small_solve_detH():
    grid = Grid(1.2, 33)
    phi = HiggsField.constant([[1, 1], [0, -1]])
    metric, report = solve(phi, 2.0, grid, SolverConfig())
    assert report.converged
    det = metric.det_field()
    _close(det, 1.0, 1e-6)


# -- transport ---------------------------------------------------------------


@check
def transport_examples():
    grid = Grid(1.2, 33)
    ident = MetricField.identity(grid, 2)
    diag = HiggsField.constant([[1, 0], [0, -1]])
    gamma = PathSpec.line(0.0, 1.0, 21)
    pi = transport(ident, diag, 0.0, gamma)
    _close(pi.full(), np.eye(2), 1e-12)
    R = 2.0
    pi = transport(ident, diag, R, gamma)
    _close(pi.full(), np.diag([math.exp(-2 * R), math.exp(2 * R)]), 1e-6)
    loop = PathSpec.circle(0.2, 0.5, 101)
    pi = transport(ident, diag, 1.5, loop)
    _close(pi.full(), np.eye(2), 1e-9)


@check
def wedge_examples():
    h = la.HermitianForm.identity(2)
    _close(wedge_log_norms(np.eye(2, dtype=complex), h, h), [0.0, 0.0])
    R = 3.0
    m = np.diag([math.exp(-2 * R), math.exp(2 * R)]).astype(complex)
    _close(wedge_log_norms(m, h, h), [2 * R, 0.0], 1e-12)
    rng = np.random.default_rng(5)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h3 = la.HermitianForm.identity(3)
    wl = wedge_log_norms(a, h3, h3)
    _close(wl[-1], math.log(abs(np.linalg.det(a))), 1e-9)


@check
def wkb_exact_example():
    grid = Grid(1.2, 33)
    ident = MetricField.identity(grid, 2)
    diag = HiggsField.constant([[1, 0], [0, -1]])
    gamma = PathSpec.line(0.0, 1.0, 51)
    for R in (1.0, 7.0):
        rpt = wkb_report(diag, ident, R, gamma)
        _close(rpt.beta / R, 2 * rpt.alpha, 1e-8)


# -- fits --------------------------------------------------------------------


@check
def fit_examples():
    R = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    sw = fit_decay(DecaySweep(R, 3.0 * np.exp(-2.0 * R), "synthetic", 1e-300))
    assert sw.fit_model == "exponential"
    _close([sw.fit_C, sw.fit_c], [3.0, 2.0], 1e-6)
    sw = fit_decay(DecaySweep(R, 5.0 / R, "synthetic", 1e-300))
    assert sw.fit_model == "reciprocal"
    _close(sw.fit_C, 5.0, 1e-9)
    y = 3.0 * np.exp(-2.0 * R) + 0.0
    y[-1] = 5e-15  # censored tail point
    sw = fit_decay(DecaySweep(R, y, "synthetic", 1e-13))
    assert bool(sw.censored[-1]) and sw.fit_model == "exponential"
    _close(sw.fit_c, 2.0, 1e-2)


def run(verbose: bool = False):
    """Run every check; returns the list of (name, exception) failures."""
    failures = []
    for fn in _CHECKS:
        name = fn.__name__
        try:
            fn()
            if verbose:
                print(f"[PASS] {name}")
        except Exception as exc:  # noqa: BLE001 - report everything
            failures.append((name, exc))
            if verbose:
                print(f"[FAIL] {name}: {exc!r}")
    if verbose:
        total = len(_CHECKS)
        print(f"{total - len(failures)}/{total} checks passed")
    return failures

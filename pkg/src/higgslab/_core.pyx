# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: batched Hermitian exp, residual stencil, ordered products.

Mirrors higgslab.kernels._numpy; the dispatch layer picks this module up when
it compiled.  Matrix dimensions up to 8 are supported (grids carry small
fibers; the stencil work, not the fiber size, is what scales).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cosh, exp, fabs, log, sinh, sqrt

cnp.import_array()

DEF MAXN = 8

ctypedef double complex cplx


# ---------------------------------------------------------------------------
# Hermitian eigensolver (cyclic Jacobi) and matrix exponential


cdef inline void _jacobi_eig(cplx* A, double* w, cplx* V, int n) noexcept nogil:
    """Eigen-decomposition of a Hermitian n×n matrix stored row-major in A.

    On exit w holds eigenvalues and V (row-major) the orthonormal
    eigenvectors as columns; A is destroyed.
    """
    cdef int p, q, k, sweep, rotated
    cdef double app, aqq, absw, tau, t, c, s
    cdef cplx apq, phase, wpk, wqk
    for p in range(n):
        for q in range(n):
            V[p * n + q] = 1.0 if p == q else 0.0
    for sweep in range(30):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p * n + q]
                absw = sqrt(apq.real * apq.real + apq.imag * apq.imag)
                if absw <= 1e-16 * (fabs(A[p * n + p].real) + fabs(A[q * n + q].real) + 1e-300):
                    continue
                rotated = 1
                phase = apq / absw
                app = A[p * n + p].real
                aqq = A[q * n + q].real
                tau = (aqq - app) / (2.0 * absw)
                if tau >= 0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                # rows p, q of A <- J† A
                for k in range(n):
                    wpk = A[p * n + k]
                    wqk = A[q * n + k]
                    A[p * n + k] = c * wpk - s * phase * wqk
                    A[q * n + k] = s * wpk + c * phase * wqk
                # columns p, q of A <- A J
                for k in range(n):
                    wpk = A[k * n + p]
                    wqk = A[k * n + q]
                    A[k * n + p] = c * wpk - s * phase.conjugate() * wqk
                    A[k * n + q] = s * wpk + c * phase.conjugate() * wqk
                for k in range(n):
                    wpk = V[k * n + p]
                    wqk = V[k * n + q]
                    V[k * n + p] = c * wpk - s * phase.conjugate() * wqk
                    V[k * n + q] = s * wpk + c * phase.conjugate() * wqk
        if rotated == 0:
            break
    for p in range(n):
        w[p] = A[p * n + p].real


cdef inline void _exp_from_eig(double* w, cplx* V, int n, double sign, cplx* out) noexcept nogil:
    cdef int i, j, k
    cdef double e
    cdef cplx acc
    cdef double ew[MAXN]
    for k in range(n):
        e = sign * w[k]
        if e > 700.0:
            e = 700.0
        elif e < -700.0:
            e = -700.0
        ew[k] = exp(e)
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for k in range(n):
                acc += V[i * n + k] * ew[k] * V[j * n + k].conjugate()
            out[i * n + j] = acc
            if j > i:
                out[j * n + i] = acc.conjugate()
            else:
                out[i * n + i] = acc.real


cdef inline void _expm_herm_2(cplx* S, cplx* H, cplx* Hi) noexcept nogil:
    cdef double a = S[0].real, d = S[3].real
    cdef cplx b = S[1]
    cdef double p = 0.5 * (a + d), q = 0.5 * (a - d)
    cdef double r = sqrt(q * q + b.real * b.real + b.imag * b.imag)
    cdef double ep = exp(p), ch = cosh(r), sh
    if r < 1e-12:
        sh = 1.0 + r * r / 6.0
    else:
        sh = sinh(r) / r
    H[0] = ep * (ch + sh * q)
    H[1] = ep * sh * b
    H[2] = ep * sh * b.conjugate()
    H[3] = ep * (ch - sh * q)
    ep = exp(-p)
    Hi[0] = ep * (ch - sh * q)
    Hi[1] = -ep * sh * b
    Hi[2] = -ep * sh * b.conjugate()
    Hi[3] = ep * (ch + sh * q)


def expm_herm_pair(S):
    """exp(S) and exp(-S) for a stack of Hermitian matrices (..., n, n)."""
    S = np.ascontiguousarray(S, dtype=np.complex128)
    shape = S.shape
    cdef int n = <int> shape[len(shape) - 1]
    if n > MAXN:
        raise ValueError(f"fiber dimension {n} exceeds compiled limit {MAXN}")
    flat = S.reshape(-1, n, n)
    cdef Py_ssize_t m = flat.shape[0]
    H = np.empty_like(flat)
    Hi = np.empty_like(flat)
    cdef cplx[:, :, ::1] Sv = flat
    cdef cplx[:, :, ::1] Hv = H
    cdef cplx[:, :, ::1] Hiv = Hi
    cdef Py_ssize_t idx
    cdef int i, j
    cdef cplx A[MAXN * MAXN]
    cdef cplx V[MAXN * MAXN]
    cdef double w[MAXN]
    with nogil:
        for idx in range(m):
            if n == 1:
                Hv[idx, 0, 0] = exp(Sv[idx, 0, 0].real)
                Hiv[idx, 0, 0] = exp(-Sv[idx, 0, 0].real)
            elif n == 2:
                _expm_herm_2(&Sv[idx, 0, 0], &Hv[idx, 0, 0], &Hiv[idx, 0, 0])
            else:
                for i in range(n):
                    for j in range(n):
                        A[i * n + j] = Sv[idx, i, j]
                _jacobi_eig(A, w, V, n)
                _exp_from_eig(w, V, n, 1.0, &Hv[idx, 0, 0])
                _exp_from_eig(w, V, n, -1.0, &Hiv[idx, 0, 0])
    return H.reshape(shape), Hi.reshape(shape)


# ---------------------------------------------------------------------------
# residual stencil


cdef inline void _matmul(cplx* a, cplx* b, cplx* out, int n) noexcept nogil:
    cdef int i, j, k
    cdef cplx acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += a[i * n + k] * b[k * n + j]
            out[i * n + j] = acc


cdef inline int _inv_small(cplx* a, cplx* out, int n) noexcept nogil:
    """Gauss-Jordan inverse with partial pivoting; a is destroyed."""
    cdef int i, j, k, piv
    cdef double best, mag
    cdef cplx factor, tmp
    for i in range(n):
        for j in range(n):
            out[i * n + j] = 1.0 if i == j else 0.0
    for k in range(n):
        piv = k
        best = a[k * n + k].real * a[k * n + k].real + a[k * n + k].imag * a[k * n + k].imag
        for i in range(k + 1, n):
            mag = a[i * n + k].real * a[i * n + k].real + a[i * n + k].imag * a[i * n + k].imag
            if mag > best:
                best = mag
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(n):
                tmp = a[k * n + j]
                a[k * n + j] = a[piv * n + j]
                a[piv * n + j] = tmp
                tmp = out[k * n + j]
                out[k * n + j] = out[piv * n + j]
                out[piv * n + j] = tmp
        factor = a[k * n + k]
        for j in range(n):
            a[k * n + j] = a[k * n + j] / factor
            out[k * n + j] = out[k * n + j] / factor
        for i in range(n):
            if i == k:
                continue
            factor = a[i * n + k]
            if factor.real != 0.0 or factor.imag != 0.0:
                for j in range(n):
                    a[i * n + j] = a[i * n + j] - factor * a[k * n + j]
                    out[i * n + j] = out[i * n + j] - factor * out[k * n + j]
    return 0


cdef inline void _edge_flux(cplx* ha, cplx* hb, double inv_h, cplx* work,
                            cplx* minv, cplx* out, int n) noexcept nogil:
    """out = ((ha+hb)/2)^{-1} (hb - ha) / h."""
    cdef int i
    for i in range(n * n):
        work[i] = 0.5 * (ha[i] + hb[i])
    _inv_small(work, minv, n)
    for i in range(n * n):
        work[i] = (hb[i] - ha[i]) * inv_h
    _matmul(minv, work, out, n)


def residual_m(H, Hinv, F, double rsq, double h):
    """Hermitian flux-form residual M on interior nodes (see kernels.__init__)."""
    H = np.ascontiguousarray(H, dtype=np.complex128)
    Hinv = np.ascontiguousarray(Hinv, dtype=np.complex128)
    F = np.ascontiguousarray(F, dtype=np.complex128)
    cdef int N = <int> H.shape[0]
    cdef int n = <int> H.shape[3]
    if n > MAXN:
        raise ValueError(f"fiber dimension {n} exceeds compiled limit {MAXN}")
    out = np.empty((N - 2, N - 2, n, n), dtype=np.complex128)
    cdef cplx[:, :, :, ::1] Hv = H
    cdef cplx[:, :, :, ::1] Hiv = Hinv
    cdef cplx[:, :, :, ::1] Fv = F
    cdef cplx[:, :, :, ::1] Mv = out
    cdef double inv_h = 1.0 / h
    cdef double d_c = 0.5 * inv_h
    cdef int i, j, a, b
    cdef cplx w1[MAXN * MAXN]
    cdef cplx w2[MAXN * MAXN]
    cdef cplx gp[MAXN * MAXN]
    cdef cplx gm[MAXN * MAXN]
    cdef cplx fc[MAXN * MAXN]
    cdef cplx cx[MAXN * MAXN]
    cdef cplx cy[MAXN * MAXN]
    cdef cplx t1[MAXN * MAXN]
    cdef cplx t2[MAXN * MAXN]
    cdef cplx acc
    cdef cplx IUNIT = 1j
    with nogil:
        for i in range(1, N - 1):
            for j in range(1, N - 1):
                # x-divergence of midpoint fluxes into fc
                _edge_flux(&Hv[i, j, 0, 0], &Hv[i + 1, j, 0, 0], inv_h, w1, w2, gp, n)
                _edge_flux(&Hv[i - 1, j, 0, 0], &Hv[i, j, 0, 0], inv_h, w1, w2, gm, n)
                for a in range(n * n):
                    fc[a] = (gp[a] - gm[a]) * inv_h
                _edge_flux(&Hv[i, j, 0, 0], &Hv[i, j + 1, 0, 0], inv_h, w1, w2, gp, n)
                _edge_flux(&Hv[i, j - 1, 0, 0], &Hv[i, j, 0, 0], inv_h, w1, w2, gm, n)
                for a in range(n * n):
                    fc[a] = 0.25 * (fc[a] + (gp[a] - gm[a]) * inv_h)
                # centered connection coefficients and their commutator
                for a in range(n):
                    for b in range(n):
                        w1[a * n + b] = (Hv[i + 1, j, a, b] - Hv[i - 1, j, a, b]) * d_c
                        w2[a * n + b] = (Hv[i, j + 1, a, b] - Hv[i, j - 1, a, b]) * d_c
                _matmul(&Hiv[i, j, 0, 0], w1, cx, n)
                _matmul(&Hiv[i, j, 0, 0], w2, cy, n)
                _matmul(cx, cy, t1, n)
                _matmul(cy, cx, t2, n)
                for a in range(n * n):
                    fc[a] = fc[a] + 0.25 * IUNIT * (t1[a] - t2[a])
                # M = H · Fcurv − rsq (H F Hinv F† H − F† H F)
                _matmul(&Hv[i, j, 0, 0], fc, t1, n)
                for a in range(n * n):
                    fc[a] = t1[a]
                if rsq != 0.0:
                    _matmul(&Hv[i, j, 0, 0], &Fv[i, j, 0, 0], t1, n)
                    _matmul(t1, &Hiv[i, j, 0, 0], t2, n)
                    for a in range(n):
                        for b in range(n):
                            t1[a * n + b] = Fv[i, j, b, a].conjugate()
                    _matmul(t2, t1, w1, n)
                    _matmul(w1, &Hv[i, j, 0, 0], t2, n)
                    _matmul(t1, &Hv[i, j, 0, 0], w1, n)
                    _matmul(w1, &Fv[i, j, 0, 0], t1, n)
                    for a in range(n * n):
                        fc[a] -= rsq * (t2[a] - t1[a])
                for a in range(n):
                    Mv[i - 1, j - 1, a, a] = fc[a * n + a].real
                    for b in range(a + 1, n):
                        acc = 0.5 * (fc[a * n + b] + fc[b * n + a].conjugate())
                        Mv[i - 1, j - 1, a, b] = acc
                        Mv[i - 1, j - 1, b, a] = acc.conjugate()
    return out


# ---------------------------------------------------------------------------
# ordered propagator product


def ordered_product(P):
    """P[m-1] ··· P[0] with renormalization every 50 factors; returns (mat, logscale)."""
    P = np.ascontiguousarray(P, dtype=np.complex128)
    cdef Py_ssize_t m = P.shape[0]
    cdef int n = P.shape[1]
    if n > MAXN:
        raise ValueError(f"fiber dimension {n} exceeds compiled limit {MAXN}")
    out = np.eye(n, dtype=np.complex128)
    cdef cplx[:, :, ::1] Pv = P
    cdef cplx[:, ::1] Ov = out
    cdef cplx acc_buf[MAXN * MAXN]
    cdef cplx cur[MAXN * MAXN]
    cdef double logscale = 0.0, mx, v
    cdef Py_ssize_t k
    cdef int i, j, l
    with nogil:
        for i in range(n):
            for j in range(n):
                cur[i * n + j] = 1.0 if i == j else 0.0
        for k in range(m):
            _matmul(&Pv[k, 0, 0], cur, acc_buf, n)
            for i in range(n * n):
                cur[i] = acc_buf[i]
            if k % 50 == 49:
                mx = 0.0
                for i in range(n * n):
                    v = sqrt(cur[i].real * cur[i].real + cur[i].imag * cur[i].imag)
                    if v > mx:
                        mx = v
                if mx > 0.0:
                    logscale += log(mx)
                    for i in range(n * n):
                        cur[i] = cur[i] / mx
        mx = 0.0
        for i in range(n * n):
            v = sqrt(cur[i].real * cur[i].real + cur[i].imag * cur[i].imag)
            if v > mx:
                mx = v
        if mx > 0.0:
            logscale += log(mx)
            for i in range(n * n):
                cur[i] = cur[i] / mx
        for i in range(n):
            for j in range(n):
                Ov[i, j] = cur[i * n + j]
    return out, logscale

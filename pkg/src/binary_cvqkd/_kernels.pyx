# cython: language_level=3
"""Compiled kernels: cyclic Jacobi eigenvalues and batched dual-bound scans."""
from libc.math cimport fabs, sqrt

import numpy as np

DEF MAX_SWEEPS = 100


cdef void _jacobi(double[:, ::1] a, Py_ssize_t n) noexcept nogil:
    # In-place cyclic Jacobi; on exit the diagonal holds the eigenvalues.
    cdef Py_ssize_t p, q, r, sweep
    cdef double off, scale, apq, theta, t, c, s, tau, g, h
    scale = 0.0
    for p in range(n):
        for q in range(n):
            scale += a[p, q] * a[p, q]
    if scale == 0.0:
        return
    for sweep in range(MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if off <= 1e-34 * scale:
            return
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) < 1e-300:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r == p or r == q:
                        continue
                    g = a[r, p]
                    h = a[r, q]
                    a[r, p] = g - s * (h + g * tau)
                    a[r, q] = h + s * (g - h * tau)
                    a[p, r] = a[r, p]
                    a[q, r] = a[r, q]


cdef double _max_diag(double[:, ::1] a, Py_ssize_t n) noexcept nogil:
    cdef double best = a[0, 0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if a[i, i] > best:
            best = a[i, i]
    return best


def symmetric_eigenvalues(mat):
    """Ascending eigenvalues of a real symmetric matrix (cyclic Jacobi)."""
    work = np.array(mat, dtype=np.float64, order="C", copy=True)
    if work.ndim != 2 or work.shape[0] != work.shape[1]:
        raise ValueError("expected a square matrix")
    cdef double[:, ::1] a = work
    cdef Py_ssize_t n = work.shape[0]
    with nogil:
        _jacobi(a, n)
    return np.sort(np.diag(work).copy())


def max_eigenvalue(mat):
    """Largest eigenvalue of a real symmetric matrix (cyclic Jacobi)."""
    work = np.array(mat, dtype=np.float64, order="C", copy=True)
    if work.ndim != 2 or work.shape[0] != work.shape[1]:
        raise ValueError("expected a square matrix")
    cdef double[:, ::1] a = work
    cdef Py_ssize_t n = work.shape[0]
    cdef double out
    with nogil:
        _jacobi(a, n)
        out = _max_diag(a, n)
    return out


def bound_pairs(base, kdir, gdir, kappas, gammas):
    """max_s lambda_max(base[s] + kappa*kdir[s] - gamma*gdir[s]) for each pair.

    base, kdir, gdir have shape (S, n, n); kappas and gammas are 1-D and
    equally long.
    """
    cdef double[:, :, ::1] b = np.ascontiguousarray(base, dtype=np.float64)
    cdef double[:, :, ::1] kd = np.ascontiguousarray(kdir, dtype=np.float64)
    cdef double[:, :, ::1] gd = np.ascontiguousarray(gdir, dtype=np.float64)
    cdef double[::1] ks = np.ascontiguousarray(kappas, dtype=np.float64).ravel()
    cdef double[::1] gs = np.ascontiguousarray(gammas, dtype=np.float64).ravel()
    if ks.shape[0] != gs.shape[0]:
        raise ValueError("kappas and gammas must have equal length")
    cdef Py_ssize_t ns = b.shape[0], n = b.shape[1], m = ks.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    work_arr = np.empty((n, n), dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[:, ::1] w = work_arr
    cdef Py_ssize_t i, s, p, q
    cdef double k, g, top, val
    with nogil:
        for i in range(m):
            k = ks[i]
            g = gs[i]
            top = -1e308
            for s in range(ns):
                for p in range(n):
                    for q in range(n):
                        w[p, q] = b[s, p, q] + k * kd[s, p, q] - g * gd[s, p, q]
                _jacobi(w, n)
                val = _max_diag(w, n)
                if val > top:
                    top = val
            out[i] = top
    return out_arr

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the loops in _kernels_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, M_PI

cdef extern from "math.h" nogil:
    void sincos(double x, double *s, double *c)

cnp.import_array()


cdef inline double complex _phase(long long k, double hi, double lo) nogil:
    cdef double t = k * hi
    t = t - floor(t)
    t = t + k * lo
    cdef double s, c
    sincos(-2.0 * M_PI * t, &s, &c)
    return c + 1j * s


def phase(k, double hi, double lo):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] kk = np.ascontiguousarray(np.ravel(k), dtype=np.int64)
    cdef Py_ssize_t i, n = kk.shape[0]
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    for i in range(n):
        o[i] = _phase(kk[i], hi, lo)
    return out.reshape(np.shape(k))


def twisted_rowconv(a, b, long long bm0, long long n1, double hi, double lo):
    # real and imaginary parts interleaved as doubles so the inner axpy vectorizes
    cdef double[::1] A = np.ascontiguousarray(a, dtype=np.complex128).view(np.float64)
    bb = np.ascontiguousarray(b, dtype=np.complex128)
    if n1 != 0:
        bb = bb * phase(n1 * (bm0 + np.arange(bb.shape[0], dtype=np.int64)), hi, lo)
    cdef double[::1] B = bb.view(np.float64)
    cdef Py_ssize_t na = A.shape[0] // 2, nb = B.shape[0] // 2, i, j
    out = np.zeros(na + nb - 1, dtype=np.complex128)
    cdef double[::1] O = out.view(np.float64)
    cdef double br, bi, ar, ai
    with nogil:
        for j in range(nb):
            br = B[2 * j]
            bi = B[2 * j + 1]
            for i in range(na):
                ar = A[2 * i]
                ai = A[2 * i + 1]
                O[2 * (i + j)] += ar * br - ai * bi
                O[2 * (i + j) + 1] += ar * bi + ai * br
    return out


def phase_table(ns, ks, double hi, double lo):
    """P[t, j] = phase(ns[t] * ks[j])."""
    cdef cnp.int64_t[::1] N = np.ascontiguousarray(ns, dtype=np.int64)
    cdef cnp.int64_t[::1] K = np.ascontiguousarray(ks, dtype=np.int64)
    cdef Py_ssize_t nn = N.shape[0], nk = K.shape[0], t, j
    out = np.empty(nn * nk, dtype=np.complex128)
    cdef double[::1] P = out.view(np.float64)
    cdef double x, s, c
    cdef long long k
    with nogil:
        for t in range(nn):
            for j in range(nk):
                k = N[t] * K[j]
                x = k * hi
                x = x - floor(x) + k * lo
                sincos(-2.0 * M_PI * x, &s, &c)
                P[2 * (t * nk + j)] = c
                P[2 * (t * nk + j) + 1] = s
    return out.reshape(nn, nk)


def band_diagonals(C, ns, ks, double hi, double lo):
    # the contraction goes to BLAS; only the phase table is compiled
    return np.ascontiguousarray(C, dtype=np.complex128) @ phase_table(ns, ks, hi, lo)

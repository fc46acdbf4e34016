"""Numpy reference implementations of the hot loops.

Phases are exp(-2*pi*i*frac(k*theta)) with theta split as hi + lo, where hi
carries 26 bits so that k*hi is exact for |k| < 2**27.
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def phase(k, hi, lo):
    k = np.asarray(k, dtype=np.float64)
    t = k * hi
    t = t - np.floor(t)
    t = t + k * lo
    return np.exp(-1j * TWO_PI * t)


def twisted_rowconv(a, b, bm0, n1, hi, lo):
    """Convolution of row a with row b after twisting b[j] by phase(n1*(bm0+j))."""
    b = np.asarray(b, dtype=np.complex128)
    if n1:
        b = b * phase(n1 * (bm0 + np.arange(b.size, dtype=np.int64)), hi, lo)
    return np.convolve(np.asarray(a, dtype=np.complex128), b)


def band_diagonals(C, ns, ks, hi, lo):
    """D[i, j] = sum_t C[i, t] * phase(ns[t] * ks[j])."""
    C = np.asarray(C, dtype=np.complex128)
    ns = np.asarray(ns, dtype=np.int64)
    ks = np.asarray(ks, dtype=np.int64)
    return C @ phase(np.outer(ns, ks), hi, lo)

"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting NCT_PURE_PYTHON=1
forces the numpy fallback.
"""
import os

import numpy as np
from scipy.signal import fftconvolve

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("NCT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

# above this many multiply-adds a row convolution goes through the FFT
FFT_THRESHOLD = 1 << 15


def phase(k, hi: float, lo: float) -> np.ndarray:
    return _impl.phase(np.asarray(k, dtype=np.int64), hi, lo)


def twisted_rowconv(a, b, bm0: int, n1: int, hi: float, lo: float) -> np.ndarray:
    if len(a) * len(b) > FFT_THRESHOLD:
        b = np.asarray(b, dtype=np.complex128)
        if n1:
            b = b * phase(n1 * (bm0 + np.arange(b.size, dtype=np.int64)), hi, lo)
        return fftconvolve(np.asarray(a, dtype=np.complex128), b)
    return _impl.twisted_rowconv(a, b, bm0, n1, hi, lo)


def band_diagonals(C, ns, ks, hi: float, lo: float) -> np.ndarray:
    return _impl.band_diagonals(C, ns, ks, hi, lo)

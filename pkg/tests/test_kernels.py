import numpy as np
import pytest

from nctorus import _kernels_py, kernels
from nctorus.smoothtorus import Theta

TH = Theta.make("golden")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled core not built")
def test_compiled_matches_fallback():
    from nctorus import _kernels
    rng = np.random.default_rng(0)
    k = rng.integers(-10**6, 10**6, 500)
    assert np.abs(_kernels.phase(k, TH.hi, TH.lo) - _kernels_py.phase(k, TH.hi, TH.lo)).max() < 1e-13
    a = rng.normal(size=40) + 1j * rng.normal(size=40)
    b = rng.normal(size=30) + 1j * rng.normal(size=30)
    ref = _kernels_py.twisted_rowconv(a, b, -7, 3, TH.hi, TH.lo)
    assert np.abs(_kernels.twisted_rowconv(a, b, -7, 3, TH.hi, TH.lo) - ref).max() < 1e-12
    C = rng.normal(size=(9, 5)) + 0j
    ns = np.arange(-2, 3)
    ks = np.arange(-20, 21)
    ref = _kernels_py.band_diagonals(C, ns, ks, TH.hi, TH.lo)
    assert np.abs(_kernels.band_diagonals(C, ns, ks, TH.hi, TH.lo) - ref).max() < 1e-12


def test_phase_split_is_accurate_for_large_k():
    import mpmath
    k = 123456789
    with mpmath.workprec(300):
        frac = (k * TH.value) % 1
        ref = complex(mpmath.exp(-2j * mpmath.pi * frac))
    assert abs(kernels.phase(np.array([k]), TH.hi, TH.lo)[0] - ref) < 1e-12


def test_fft_branch_matches_direct():
    rng = np.random.default_rng(2)
    a = rng.normal(size=400) + 0j
    b = rng.normal(size=300) + 0j
    fast = kernels.twisted_rowconv(a, b, 5, 2, TH.hi, TH.lo)
    slow = _kernels_py.twisted_rowconv(a, b, 5, 2, TH.hi, TH.lo)
    assert np.abs(fast - slow).max() < 1e-11

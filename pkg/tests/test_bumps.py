import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from nctorus.bumps import (build_bump, certify, fourier, make_bump, report_csv, samples_csv,
                           trig_eval)
from nctorus.errors import CaseMismatch

SILVER = math.sqrt(2) - 1
SILVER_BETA = 5 - 12 * SILVER  # (p,q) = (2,5), (p',q') = (5,12)


def quad_oracle(b, fn, m):
    """Adaptive scipy quadrature split at the breakpoints."""
    pts = sorted(set(b.breakpoints) | {0.0, 1.0})
    re = im = 0.0
    for a, c in zip(pts, pts[1:]):
        re += quad(lambda x: fn(np.array([x]))[0] * math.cos(2 * math.pi * m * x), a, c,
                   epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        im -= quad(lambda x: fn(np.array([x]))[0] * math.sin(2 * math.pi * m * x), a, c,
                   epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    return complex(re, im)


def test_golden_wide_case(golden1):
    b = build_bump(golden1, "principal", "corrected")
    assert b.case == "wide"
    x = np.linspace(1 / 5 - float(golden1.beta), float(golden1.beta), 50)
    assert np.allclose(b.f(x), 1.0, atol=1e-15)
    mid = (1 / 5 - float(golden1.beta)) / 2
    assert b.f(np.array([mid]))[0] == pytest.approx(0.5, abs=1e-14)


def test_silver_narrow_case():
    assert SILVER_BETA == pytest.approx(0.029437, abs=1e-6)
    for mode in ("corrected", "paper-literal", "smooth"):
        assert make_bump(5, SILVER_BETA, mode).case == "narrow"


def test_case_mismatch():
    with pytest.raises(CaseMismatch):
        make_bump(5, 0.3)


@pytest.mark.parametrize("mode", ["corrected", "smooth"])
@pytest.mark.parametrize("q,beta", [(5, None), (5, SILVER_BETA), (3, None)])
def test_certified_pairs(golden1, mode, q, beta):
    if beta is None:
        beta = float(golden1.beta) if q == 5 else float(golden1.beta_prime)
    rep = certify(make_bump(q, beta, mode))
    assert rep["max_violation"] < 1e-12
    assert rep["smoothness_order"] >= 1


def test_literal_mode_narrow_fails():
    rep = certify(make_bump(5, SILVER_BETA, "paper-literal"))
    assert rep["violations"]["partition"] > 0.1
    left = 0.5 / 5 - SILVER_BETA
    b = make_bump(5, SILVER_BETA, "paper-literal")
    # the literal ramp does not vanish at the left support edge
    assert b.f(np.array([left + 1e-12]))[0] > 1e-3


def test_smooth_profile_has_higher_order(golden1):
    lit = certify(build_bump(golden1, "principal", "corrected"))
    smo = certify(build_bump(golden1, "principal", "smooth"))
    assert smo["smoothness_order"] > lit["smoothness_order"]


@pytest.mark.parametrize("mode", ["corrected", "smooth"])
def test_fourier_against_scipy(golden1, mode):
    b = build_bump(golden1, "principal", mode)
    fh, gh = fourier(b, 16)
    for m in (0, 1, 5, 16):
        assert abs(fh[16 + m] - quad_oracle(b, b.f, m)) < 1e-12
        assert abs(gh[16 + m] - quad_oracle(b, b.g, m)) < 1e-12
    assert fh[16] == pytest.approx(float(golden1.beta), abs=1e-12)
    assert gh[16].real > 0


def test_fourier_realness_and_decay(golden1):
    b = build_bump(golden1, "principal", "corrected")
    fh, gh = fourier(b, 256)
    assert np.abs(fh - np.conj(fh[::-1])).max() < 1e-15
    assert np.abs(gh - np.conj(gh[::-1])).max() < 1e-15
    m = np.arange(16, 257)
    C = np.max(np.abs(fh[256 + m]) * m**2)
    assert np.all(np.abs(fh[256 + m]) <= C / m**2 + 1e-18)
    assert C < 10


def test_reconstruction_improves(golden1):
    b = build_bump(golden1, "principal", "smooth")
    x = np.linspace(0, 1, 2001)
    errs = []
    for M in (64, 128, 256):
        fh, _ = fourier(b, M)
        errs.append(np.abs(trig_eval(fh, x) - b.f(x)).max())
    assert errs[0] > errs[1] > errs[2]


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 40), st.floats(0.02, 0.98))
def test_case_dichotomy_and_identities(q, frac):
    beta = frac / q
    b = make_bump(q, beta, "corrected")
    assert b.case == ("wide" if beta >= 0.5 / q else "narrow")
    x = np.linspace(0, 1, 4001)
    f = b.f(x)
    assert f.min() >= -1e-15 and f.max() <= 1 + 1e-15
    assert np.abs(b.g(x) * b.g(x - beta)).max() < 1e-14


def test_csv_outputs(golden1):
    b = build_bump(golden1, "principal", "corrected")
    rep = certify(b, 1000)
    assert report_csv(rep).splitlines()[0] == "check,value"
    lines = samples_csv(b, 10).splitlines()
    assert lines[0] == "x,f,g" and len(lines) == 11


@pytest.mark.parametrize("q", [2, 5, 40])
def test_wide_case_at_boundary_beta(q):
    b = make_bump(q, 0.5 / q, "corrected")
    assert b.case == "wide"
    assert certify(b)["max_violation"] < 1e-12

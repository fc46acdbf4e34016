import cmath
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from nctorus.atalgebra import (ATElement, Composite, Embedding, LaurentMatrix, at_adjoint, at_mul,
                               embed, homomorphism_residuals, odd_pullback, psi, psi_coboundary,
                               random_element, tau_pair, trace_pullback)
from nctorus.errors import LevelMismatch, RankDeficientSamples


def evaluate(L: LaurentMatrix, z: complex) -> np.ndarray:
    out = np.zeros((L.size, L.size), dtype=complex)
    for k, A in L.terms.items():
        out += A.toarray() * z**k
    return out


def j_matrix(size: int, z: complex) -> np.ndarray:
    """Lower shift with z (or 1) in the top-right corner, built by hand."""
    J = np.zeros((size, size), dtype=complex)
    for i in range(size - 1):
        J[i + 1, i] = 1
    J[0, size - 1] = z
    return J


def subst_oracle(L: LaurentMatrix, J: np.ndarray) -> np.ndarray:
    out = 0
    Jinv = np.linalg.inv(J)
    for k, A in L.terms.items():
        P = np.linalg.matrix_power(J if k >= 0 else Jinv, abs(k))
        out = out + np.kron(A.toarray(), P)
    return out


def test_embedding_matches_pointwise_oracle(golden1):
    e = Embedding.from_level(golden1)
    rng = np.random.default_rng(5)
    x = random_element(rng, e.source, 2)
    y = e(x)
    for phi in (0.3, 2.1):
        z = cmath.exp(1j * phi)
        first = scipy.linalg.block_diag(subst_oracle(x.first, j_matrix(e.a, z)),
                                        subst_oracle(x.second, j_matrix(e.b, z)))
        second = scipy.linalg.block_diag(subst_oracle(x.first, j_matrix(e.c, 1)),
                                         subst_oracle(x.second, j_matrix(e.d, 1)))
        assert np.abs(evaluate(y.first, z) - first).max() < 1e-12
        assert np.abs(evaluate(y.second, z) - second).max() < 1e-12


def test_unit_and_laurent_inverse():
    sizes = (3, 2)
    one = ATElement.identity(sizes)
    rng = np.random.default_rng(0)
    x = random_element(rng, sizes, 1)
    assert (at_mul(one, x) - x).max_abs() == 0
    E = np.zeros((3, 3))
    E[0, 0] = 1
    a = ATElement(LaurentMatrix.from_dense({1: E}), LaurentMatrix.zero(2))
    b = ATElement(LaurentMatrix.from_dense({-1: E}), LaurentMatrix.zero(2))
    ref = ATElement(LaurentMatrix.from_dense({0: E}), LaurentMatrix.zero(2))
    assert (at_mul(a, b) - ref).max_abs() == 0


def test_adjoint_antimultiplicative():
    rng = np.random.default_rng(1)
    sizes = (4, 3)
    for _ in range(5):
        x, y = random_element(rng, sizes, 2), random_element(rng, sizes, 2)
        lhs = at_adjoint(at_mul(x, y))
        rhs = at_mul(at_adjoint(y), at_adjoint(x))
        assert (lhs - rhs).max_abs() < 1e-12
        assert (at_adjoint(at_adjoint(x)) - x).max_abs() == 0


def test_level_mismatch(golden1):
    e = Embedding.from_level(golden1)
    with pytest.raises(LevelMismatch):
        embed(e, ATElement.identity((4, 4)))
    with pytest.raises(LevelMismatch):
        at_mul(ATElement.identity((5, 3)), ATElement.identity((3, 5)))


def test_tau_pair_examples():
    assert tau_pair(ATElement.identity((5, 3))) == (5, 3)
    z = ATElement(LaurentMatrix.from_dense({1: np.eye(5)}), LaurentMatrix.zero(3))
    assert tau_pair(z) == (0, 0)
    E = np.zeros((5, 5))
    E[0, 0] = 1
    assert tau_pair(ATElement(LaurentMatrix.from_dense({0: E}), LaurentMatrix.zero(3))) == (1, 0)


def test_traciality_of_tau():
    rng = np.random.default_rng(2)
    x, y = random_element(rng, (4, 3), 2), random_element(rng, (4, 3), 2)
    c = at_mul(x, y) - at_mul(y, x)
    assert max(abs(t) for t in tau_pair(c)) < 1e-12


def test_embedding_invariants(golden_levels, silver_levels):
    for levels in (golden_levels, silver_levels):
        for lv, nxt in zip(levels, levels[1:]):
            e = Embedding.from_level(lv)
            assert e.check(nxt) == []
            assert e.det == 1


def test_unit_and_z_trace(golden1):
    e = Embedding.from_level(golden1)
    one = ATElement.identity(e.source)
    assert (e(one) - ATElement.identity(e.target)).max_abs() == 0
    z = ATElement(LaurentMatrix.from_dense({1: np.eye(5)}), LaurentMatrix.zero(3))
    assert tau_pair(e(z))[0] == 0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trace_pullback_levels(golden_levels, silver_levels, n):
    for levels in (golden_levels, silver_levels):
        e = Embedding.from_level(levels[n - 1])
        pb = trace_pullback(e, seed=n)
        assert np.abs(pb.matrix - e.matrix()).max() < 1e-9
        R = pb.integer_matrix()
        assert R is not None and round(np.linalg.det(R)) == 1
        js = pb.to_json()
        assert js["exact_integers"] and js["det"] == "1"


def test_trace_pullback_composition(golden_levels):
    e1, e2 = Embedding.from_level(golden_levels[0]), Embedding.from_level(golden_levels[1])
    comp = trace_pullback(Composite((e1, e2)), seed=3)
    prod = trace_pullback(e2, seed=4).matrix @ trace_pullback(e1, seed=5).matrix
    assert np.abs(comp.matrix - prod).max() < 1e-8


def test_trace_pullback_rank_deficient(golden1):
    e = Embedding.from_level(golden1)
    with pytest.raises(ValueError):
        trace_pullback(e, samples=2)


def test_laurent_mode_reports_residual(golden1):
    pb = trace_pullback(Embedding.from_level(golden1), seed=0, mode="laurent")
    assert pb.residual > 1e-3  # the J' blocks forget the winding


def test_psi_term_rule():
    assert psi({-1: 1}, {1: 1}) == 2j * math.pi
    assert psi({0: 1}, {3: 2, -2: 1, 0: 5}) == 0


@settings(max_examples=30, deadline=None)
@given(*[st.dictionaries(st.integers(-3, 3), st.complex_numbers(max_magnitude=2, allow_nan=False,
                                                                allow_infinity=False), max_size=5)
         for _ in range(3)])
def test_psi_is_hochschild_cocycle(f, g, h):
    assert abs(psi_coboundary(f, g, h)) < 1e-12


def test_odd_pullback_regression(golden1):
    pb = odd_pullback(Embedding.from_level(golden1), seed=0)
    R = pb.integer_matrix()
    assert R is not None and R.tolist() == [[1, 1], [0, 0]]
    assert not pb.invertible


def test_homomorphism_residuals_small(golden1):
    res = homomorphism_residuals(Embedding.from_level(golden1), samples=5, seed=1)
    assert res["unitality"] == 0
    assert res["multiplicativity"] < 1e-12 and res["star"] < 1e-12


def test_rank_deficient_samples():
    from nctorus.atalgebra import _fit
    src = np.ones((5, 2))
    with pytest.raises(RankDeficientSamples):
        _fit(src, src, "constant")

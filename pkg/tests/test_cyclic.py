import itertools

import numpy as np
import pytest

from nctorus.cyclic import (Cochain, CochainFamily, TorusTrace, connes_B, direct_sum,
                            entire_check, cochain_seminorm, homomorphism_matrix, hochschild_b,
                            hp_bruteforce, matrix_algebra, pair_trace_projection, point, restrict,
                            tensor_power_family, trace_cochain)
from nctorus.errors import (BudgetExceeded, DegreeUnderflow, MissingSeminorm, NotIdempotent,
                            ShapeMismatch)

M2 = matrix_algebra(2)
CC = direct_sum(point(), point())
ALGEBRAS = {"M2": M2, "C+C": CC}


# oracles evaluating the textbook formulas element by element
def b_oracle(phi, args):
    alg, n = phi.algebra, phi.degree
    a = list(args)
    total = 0
    for j in range(n + 1):
        total += (-1) ** j * phi(*(a[:j] + [alg.mul(a[j], a[j + 1])] + a[j + 2:]))
    return total + (-1) ** (n + 1) * phi(alg.mul(a[n + 1], a[0]), *a[1:n + 1])


def B_oracle(phi, args):
    alg, n = phi.algebra, phi.degree
    one = alg.unit

    def B0(*a):
        return phi(one, *a) - (-1) ** n * phi(*a, one)

    a = list(args)
    total = 0
    for j in range(n):
        rot = a[j:] + a[:j]
        total += (-1) ** ((n - 1) * j) * B0(*rot)
    return total


def rand_elems(alg, rng, k):
    return [rng.normal(size=alg.dim) + 1j * rng.normal(size=alg.dim) for _ in range(k)]


def test_algebra_axioms():
    for alg in (M2, CC, direct_sum(matrix_algebra(2), point())):
        chk = alg.check()
        assert chk["associativity"] < 1e-13 and chk["unit"] == 0


@pytest.mark.parametrize("name", ALGEBRAS)
@pytest.mark.parametrize("n", [0, 1, 2])
def test_b_matches_oracle(name, n):
    alg = ALGEBRAS[name]
    rng = np.random.default_rng(n)
    phi = Cochain.random(alg, n, rng)
    bphi = hochschild_b(phi)
    for _ in range(5):
        args = rand_elems(alg, rng, n + 2)
        assert abs(bphi(*args) - b_oracle(phi, args)) < 1e-12


@pytest.mark.parametrize("name", ALGEBRAS)
@pytest.mark.parametrize("n", [1, 2, 3])
def test_B_matches_oracle(name, n):
    alg = ALGEBRAS[name]
    rng = np.random.default_rng(10 + n)
    phi = Cochain.random(alg, n, rng)
    Bphi = connes_B(phi)
    for _ in range(5):
        args = rand_elems(alg, rng, n)
        assert abs(Bphi(*args) - B_oracle(phi, args)) < 1e-12


def test_degree_zero_b_and_trace():
    rng = np.random.default_rng(0)
    phi = Cochain.random(M2, 0, rng)
    a0, a1 = rand_elems(M2, rng, 2)
    ref = phi(M2.mul(a0, a1)) - phi(M2.mul(a1, a0))
    assert abs(hochschild_b(phi)(a0, a1) - ref) < 1e-13
    assert hochschild_b(trace_cochain(M2)).max_abs() < 1e-15


def test_B_degree_underflow():
    with pytest.raises(DegreeUnderflow):
        connes_B(trace_cochain(M2))


def test_B_kills_normalized_antisymmetric():
    # phi(a0,a1) = Tr(a0 [D, a1]) with D traceless is cyclic and vanishes on the unit
    D = np.diag([1.0, -1.0])
    d = M2.dim
    vals = np.zeros((d, d), dtype=complex)
    for i, j in itertools.product(range(d), repeat=2):
        A, B = M2.to_blocks(M2.basis(i))[0], M2.to_blocks(M2.basis(j))[0]
        vals[i, j] = np.trace(A @ (D @ B - B @ D))
    phi = Cochain(1, M2, vals)
    assert abs(phi(M2.unit, M2.basis(1))) == 0
    assert connes_B(phi).max_abs() < 1e-15


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        Cochain(1, M2, np.zeros((4, 3)))
    with pytest.raises(ShapeMismatch):
        restrict(trace_cochain(M2), np.eye(3), M2)
    with pytest.raises(ShapeMismatch):
        CochainFamily("even", [trace_cochain(M2), Cochain.random(M2, 1, np.random.default_rng(0))])


def bicomplex_residuals(alg, count=50, max_degree=3, seed=0):
    rng = np.random.default_rng(seed)
    worst = {"bb": 0.0, "BB": 0.0, "bB+Bb": 0.0}
    for n in range(max_degree + 1):
        for _ in range(count):
            phi = Cochain.random(alg, n, rng)
            worst["bb"] = max(worst["bb"], hochschild_b(hochschild_b(phi)).max_abs())
            if n >= 2:
                worst["BB"] = max(worst["BB"], connes_B(connes_B(phi)).max_abs())
            if n >= 1:
                anti = hochschild_b(connes_B(phi)) + connes_B(hochschild_b(phi))
                worst["bB+Bb"] = max(worst["bB+Bb"], anti.max_abs())
    return worst


@pytest.mark.parametrize("name", ALGEBRAS)
def test_bicomplex_identities(name):
    worst = bicomplex_residuals(ALGEBRAS[name], count=10)
    assert max(worst.values()) < 1e-13


def embedding_m2_into_m4():
    """a -> diag(a, a) as a homomorphism M2 -> M4."""
    M4 = matrix_algebra(4)
    H = homomorphism_matrix(M2, M4, lambda bl: [np.kron(np.eye(2), bl[0])])
    return M4, H


def test_restrict_identity_and_b_naturality():
    rng = np.random.default_rng(3)
    phi = Cochain.random(M2, 2, rng)
    assert (restrict(phi, np.eye(M2.dim), M2) - phi).max_abs() == 0
    M4, H = embedding_m2_into_m4()
    psi = Cochain.random(M4, 1, rng)
    lhs = restrict(hochschild_b(psi), H, M2)
    rhs = hochschild_b(restrict(psi, H, M2))
    assert (lhs - rhs).max_abs() < 1e-13
    lhs = restrict(connes_B(psi), H, M2)
    rhs = connes_B(restrict(psi, H, M2))
    assert (lhs - rhs).max_abs() < 1e-13


def test_restrict_trace_gives_multiplicity():
    # diag(a, a): Tr_4 pulls back to 2 Tr_2
    M4, H = embedding_m2_into_m4()
    back = restrict(trace_cochain(M4), H, M2)
    assert (back - trace_cochain(M2).scale(2)).max_abs() < 1e-14
    # diag(a, a, b) : M2 + C -> M5 pulls back with weights (2, 1)
    src = direct_sum(matrix_algebra(2), point())
    M5 = matrix_algebra(5)
    H = homomorphism_matrix(src, M5, lambda bl: [np.block([
        [np.kron(np.eye(2), bl[0]), np.zeros((4, 1))], [np.zeros((1, 4)), bl[1]]])])
    back = restrict(trace_cochain(M5), H, src)
    assert (back - trace_cochain(src, [2.0, 1.0])).max_abs() < 1e-14


def test_restrict_composes_contravariantly():
    M4, H = embedding_m2_into_m4()
    M8 = matrix_algebra(8)
    G = homomorphism_matrix(M4, M8, lambda bl: [np.kron(np.eye(2), bl[0])])
    phi = Cochain.random(M8, 1, np.random.default_rng(4))
    lhs = restrict(phi, G @ H, M2)
    rhs = restrict(restrict(phi, G, M4), H, M2)
    assert (lhs - rhs).max_abs() < 1e-12


def test_cocycle_persistence_under_restrict():
    # representative (b+B) cocycles of M4 in degree 2 restrict to cocycles of M2
    M4, H = embedding_m2_into_m4()
    _, _, gens = hp_bruteforce(M2, 2)
    d = M2.dim
    for g in gens[2]:
        phi2 = Cochain(2, M2, g[:d ** 3].reshape(d, d, d))
        phi0 = Cochain(0, M2, g[d ** 3:])
        # even cocycle condition: b phi0 + B phi2 = 0 and b phi2 = 0
        assert (hochschild_b(phi0) + connes_B(phi2)).max_abs() < 1e-12
        assert hochschild_b(phi2).max_abs() < 1e-12
    t0 = trace_cochain(M4)
    t2 = Cochain(2, M4, np.zeros((M4.dim,) * 3))
    assert (hochschild_b(t0) + connes_B(t2)).max_abs() < 1e-13
    r0, r2 = restrict(t0, H, M2), restrict(t2, H, M2)
    assert (hochschild_b(r0) + connes_B(r2)).max_abs() < 1e-13
    assert hochschild_b(r2).max_abs() < 1e-13


def test_hp_examples():
    assert hp_bruteforce(M2, 2)[:2] == (1, 0)
    assert hp_bruteforce(point(), 2)[:2] == (1, 0)
    assert hp_bruteforce(CC, 2)[:2] == (2, 0)


def test_hp_basis_permutation_invariant():
    rng = np.random.default_rng(0)
    for alg in (M2, CC):
        perm = rng.permutation(alg.dim)
        assert hp_bruteforce(alg.permuted(perm), 2)[:2] == hp_bruteforce(alg, 2)[:2]


def test_hp_budget():
    with pytest.raises(BudgetExceeded):
        hp_bruteforce(matrix_algebra(3), 3, budget=10**6)


def test_entire_check_examples():
    tau = trace_cochain(M2).scale(0.5)
    ball = [M2.unit, M2.basis(0), M2.basis(1)]
    rep = entire_check(tensor_power_family(tau, 4), ball, trials=50)
    assert rep["verdict"] == "entire" and rep["C"] <= 1 + 1e-12
    blow = factorial_family(4)
    assert entire_check(blow, ball, trials=5)["verdict"] == "not entire"
    one = tensor_power_family(tau, 1)
    assert entire_check(one, ball)["verdict"] == "insufficient degrees"


def factorial_family(count, alg=None, scale=1.0):
    import math
    alg = alg or M2
    members = []
    for k in range(count):
        tau = trace_cochain(alg).scale(0.5)
        T = tau.values
        for _ in range(2 * k):
            T = np.multiply.outer(T, tau.values)
        members.append(Cochain(2 * k, alg, scale * math.factorial(2 * k) * T))
    return CochainFamily("even", members)


@pytest.mark.parametrize("scale", [1e-6, 1.0, 1e6])
def test_entire_verdict_scale_invariant(scale):
    ball = [M2.unit, M2.basis(0)]
    tau = trace_cochain(M2).scale(0.5 * scale)
    assert entire_check(tensor_power_family(tau, 4), ball, trials=20)["verdict"] == "entire"
    assert entire_check(factorial_family(4, scale=scale), ball, trials=5)["verdict"] == "not entire"


def test_seminorm_examples():
    tr = trace_cochain(M2)
    assert cochain_seminorm(tr) >= 2 - 1e-6
    assert cochain_seminorm(tr.scale(3)) == pytest.approx(3 * cochain_seminorm(tr), rel=1e-12)
    assert cochain_seminorm(tr.scale(0)) == 0
    with pytest.raises(MissingSeminorm):
        cochain_seminorm(tr, l=2)


def test_pairing_examples(golden1):
    tr = trace_cochain(M2)
    assert pair_trace_projection(tr, M2.unit) == 2
    assert pair_trace_projection(tr, M2.basis(0)) == 1
    with pytest.raises(NotIdempotent):
        pair_trace_projection(tr, 2 * M2.unit)
    from nctorus.projections import rieffel_projection
    e = rieffel_projection(golden1, "principal", 256)
    assert abs(pair_trace_projection(TorusTrace(512), e) - float(golden1.beta)) < 1e-10


def test_cochain_json_shape_header():
    js = Cochain.random(CC, 1, np.random.default_rng(0)).to_json()
    assert js["shape"] == [2, 2] and len(js["re"]) == 4

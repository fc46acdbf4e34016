"""Rieffel-type projections, translate families, matrix units and the
approximating unitaries u_n, v_n.

Two sides are built from one level.  With U the "function" generator and
w = V^k the shift that multiplies U by exp(2 pi i beta) under conjugation,

    e = w g(U) + f(U) + g(U) w*.

principal: U = u, w = v^{q'}, step alpha = alpha_{exp(-2 pi i p/q), 1}
dual:      U = v, w = u^{q},  step alpha' = alpha_{1, exp(2 pi i p'/q')}

With these choices e_{kk} = alpha^{k-1}(e) sits where U is close to the
(k-1)-th point of the rational rotation, and v (resp. u) carries e_{11} close
to e_{22}; the matrix unit e_{21} is the polar part of e_{22} v e_{11}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import bumps
from .errors import CertificationFailed, DegenerateCorner
from .numbertheory import LevelData
from .smoothtorus import (Theta, TorusElement, act, act_root, adjoint, derive, nmul,
                          norm_estimate, norm_lower, norm_upper, opnorm, opnorm_auto,
                          residual_norm, trace)

DEFAULT_MODE = "smooth"
DEFAULT_M = 256
DEFAULT_K = 512
PRUNE = 1e-15


@dataclass(frozen=True)
class SideSpec:
    role: str
    q: int        # family size
    beta: float
    step_p: int   # alpha step is exp(2 pi i step_p / q) on ``axis``
    axis: int     # 0: acts on u, 1: acts on v
    shift: Tuple[int, int]  # monomial (m, n) of w
    carrier: Tuple[int, int]  # monomial carrying e_11 towards e_22
    r: Tuple[int, int]  # commutation constant exp(2 pi i r0/r1)


def side_spec(level: LevelData, role: str) -> SideSpec:
    if role == "principal":
        return SideSpec("principal", level.q, float(level.beta), -level.p, 0,
                        (0, level.qp), (0, 1), (level.p, level.q))
    if role == "dual":
        return SideSpec("dual", level.qp, float(level.beta_prime), level.pp, 1,
                        (level.q, 0), (1, 0), (level.pp, level.qp))
    raise ValueError(f"role must be 'principal' or 'dual', got {role!r}")


def _theta(level: LevelData) -> Theta:
    return Theta.make(level.theta, level.precision_bits)


def _level_key(level: LevelData) -> tuple:
    return (str(level.theta), level.precision_bits, level.lower, level.upper)


_LEVELS: Dict[tuple, LevelData] = {}


def _remember(level: LevelData) -> tuple:
    key = _level_key(level)
    _LEVELS[key] = level
    return key


# projections -------------------------------------------------------------------

def assemble(theta, f_hat: np.ndarray, g_hat: np.ndarray, axis: int,
             shift: Tuple[int, int]) -> TorusElement:
    """w g(U) + f(U) + g(U) w* with U = u (axis 0) or v (axis 1), w = u^a v^b."""
    M = (f_hat.size - 1) // 2
    if axis == 0:
        F = TorusElement.u_series(theta, -M, f_hat)
        G = TorusElement.u_series(theta, -M, g_hat)
    else:
        F = TorusElement.v_series(theta, -M, f_hat)
        G = TorusElement.v_series(theta, -M, g_hat)
    w = TorusElement.monomial(theta, shift[0], shift[1])
    return nmul(w, G) + F + nmul(G, adjoint(w))


@lru_cache(maxsize=32)
def _projection_cached(key: tuple, role: str, M: int, mode: str, tol: float) -> TorusElement:
    level = _LEVELS[key]
    spec = side_spec(level, role)
    b = bumps.build_bump(level, role, mode)
    rep = bumps.certify(b, 10_000)
    if rep["max_violation"] > tol:
        raise CertificationFailed(f"{mode} bump pair ({role}) violates identities by "
                                  f"{rep['max_violation']:.3e}")
    f_hat, g_hat = bumps.fourier(b, M)
    # the pair is real, so enforce exact conjugate symmetry of the coefficients
    f_hat = 0.5 * (f_hat + np.conj(f_hat[::-1]))
    g_hat = 0.5 * (g_hat + np.conj(g_hat[::-1]))
    return assemble(_theta(level), f_hat, g_hat, spec.axis, spec.shift)


def rieffel_projection(level: LevelData, role: str = "principal", M: int = DEFAULT_M,
                       mode: str = DEFAULT_MODE, certify_tol: float = 1e-10) -> TorusElement:
    """e_beta (principal) or e_beta' (dual) truncated to Fourier modes |m| <= M."""
    return _projection_cached(_remember(level), role, int(M), mode, float(certify_tol)).copy()


def idempotent_residual(e: TorusElement, K: int = DEFAULT_K) -> float:
    return opnorm(nmul(e, e) - e, K)[0]


# translates --------------------------------------------------------------------

def translate_family(e: TorusElement, step, axis: int, count: int) -> List[TorusElement]:
    """[alpha^k(e)] for k < count.

    ``step`` is either a rational (p, q), meaning exp(2 pi i p/q), or a unit
    complex number.
    """
    out = [e.copy()]
    for k in range(1, count):
        if isinstance(step, tuple):
            p, q = step
            out.append(act_root(e, k * p, q, axis))
        else:
            t = complex(step) ** k
            out.append(act(e, t, 1) if axis == 0 else act(e, 1, t))
    return out


def orthogonality_residuals(family: Sequence[TorusElement], K: int = DEFAULT_K,
                            tol: float | None = None) -> dict:
    """max over k != l of ||x_k x_l|| (k < l suffices since (x_k x_l)* = x_l x_k)."""
    worst, pair, how = 0.0, None, None
    for a in range(len(family)):
        for b in range(a + 1, len(family)):
            r, kind = residual_norm(nmul(family[a], family[b]), K, tol)
            if r >= worst:
                worst, pair, how = r, (a, b), kind
    return {"max_offdiag": worst, "pair": pair, "bound": how}


def family(level: LevelData, role: str, M: int = DEFAULT_M,
           mode: str = DEFAULT_MODE) -> List[TorusElement]:
    spec = side_spec(level, role)
    e = rieffel_projection(level, role, M, mode)
    return translate_family(e, (spec.step_p, spec.q), spec.axis, spec.q)


def complementary_pair(principal: Sequence[TorusElement],
                       dual: Sequence[TorusElement]) -> Tuple[TorusElement, TorusElement]:
    """e1 = sum of dual translates, e2 = 1 - sum of principal translates."""
    th = principal[0].theta
    e1 = TorusElement.zero(th)
    for x in dual:
        e1 = e1 + x
    s = TorusElement.zero(th)
    for x in principal:
        s = s + x
    return e1, TorusElement.one(th) - s


@dataclass
class ProjectionBundle:
    level: LevelData
    e_beta: TorusElement
    e_beta_prime: TorusElement
    translates: List[TorusElement]
    translates_prime: List[TorusElement]
    e1: TorusElement
    e2: TorusElement
    M: int
    mode: str

    def report(self, K: int = DEFAULT_K) -> dict:
        lv = self.level
        out = {"M": self.M, "K": K, "mode": self.mode}
        for name, x, tr in (("e_beta", self.e_beta, float(lv.beta)),
                            ("e_beta_prime", self.e_beta_prime, float(lv.beta_prime))):
            out[name] = {
                "idempotent": idempotent_residual(x, K),
                "selfadjoint_coeff": (x - adjoint(x)).max_abs(),
                "trace": trace(x).real,
                "trace_error": abs(trace(x) - tr),
            }
        out["orthogonality_principal"] = orthogonality_residuals(self.translates, K)
        out["orthogonality_dual"] = orthogonality_residuals(self.translates_prime, K)
        t1, t2 = trace(self.e1).real, trace(self.e2).real
        out["e1"] = {"trace": t1, "idempotent": idempotent_residual(self.e1, K)}
        out["e2"] = {"trace": t2, "idempotent": idempotent_residual(self.e2, K)}
        out["trace_gap"] = abs(t1 - t2)
        out["q_prime_beta_prime"] = lv.qp * float(lv.beta_prime)
        return out


def build_bundle(level: LevelData, M: int = DEFAULT_M, mode: str = DEFAULT_MODE) -> ProjectionBundle:
    fam = family(level, "principal", M, mode)
    fam_d = family(level, "dual", M, mode)
    e1, e2 = complementary_pair(fam, fam_d)
    return ProjectionBundle(level, fam[0], fam_d[0], fam, fam_d, e1, e2, M, mode)


# matrix units ----------------------------------------------------------------------

def polar_part(x: TorusElement, tol: float = 1e-13, maxiter: int = 60,
               prune: float = PRUNE) -> Tuple[TorusElement, int]:
    """Partial isometry of x by the Newton-Schulz iteration W <- W (3 - W*W) / 2.

    Requires the nonzero singular values of x to lie in (0, sqrt 3).  Tiny
    singular values (numerical noise in x) would be driven to 1 as well, so
    the loop also stops as soon as the step size grows again.
    Returns (W, iterations used).
    """
    W = x.copy()
    prev = np.inf
    for it in range(1, maxiter + 1):
        P = nmul(adjoint(W), W).pruned(prune)
        W_new = (nmul(W, 3.0 - P) * 0.5).pruned(prune)
        step = (W_new - W).max_abs()
        if step > prev:
            return W, it - 1
        W = W_new
        if step < tol:
            return W, it
        prev = step
    return W, maxiter


SWEEP_FULL_MAX = 8


@dataclass
class MatrixUnitSet:
    """Matrix units e_ij of one side; off-diagonal units are built on demand."""

    role: str
    size: int
    col1: Dict[int, TorusElement]
    diag: Dict[int, TorusElement]
    corner_unitary: TorusElement
    e21: TorusElement
    e21_raw: TorusElement
    polar_iterations: int
    spec: SideSpec = field(repr=False)
    _cache: Dict[Tuple[int, int], TorusElement] = field(default_factory=dict, repr=False)

    def e(self, i: int, j: int) -> TorusElement:
        if i == j:
            return self.diag[i]
        if (i, j) not in self._cache:
            if j == 1:
                x = self.col1[i]
            elif i == 1:
                x = adjoint(self.col1[j])
            else:
                x = nmul(self.col1[i], adjoint(self.col1[j])).pruned(PRUNE)
            self._cache[(i, j)] = x
        return self._cache[(i, j)]

    @property
    def units(self) -> Dict[Tuple[int, int], TorusElement]:
        q = self.size
        return {(i, j): self.e(i, j) for i in range(1, q + 1) for j in range(1, q + 1)}

    def _quadruples(self, samples: int, seed: int):
        q = self.size
        if q <= SWEEP_FULL_MAX:
            r = range(1, q + 1)
            return [(i, j, k, l) for i in r for j in r for k in r for l in r]
        rng = np.random.default_rng(seed)
        out = []
        for t in range(samples):
            i, j, l = (int(v) for v in rng.integers(1, q + 1, 3))
            # half of the samples hit the j == k relation
            k = j if t % 2 == 0 else int(rng.integers(1, q + 1))
            out.append((i, j, k, l))
        return out

    def residuals(self, K: int = DEFAULT_K, tol: float | None = None,
                  samples: int = 200, seed: int = 0) -> dict:
        """Relation residuals; the e_ij e_kl sweep is exhaustive for q <= 8 and
        a seeded sample of index quadruples beyond."""
        q = self.size
        worst, where = 0.0, None
        quads = self._quadruples(samples, seed)
        for i, j, k, l in quads:
            prod = nmul(self.e(i, j), self.e(k, l))
            if j == k:
                prod = prod - self.e(i, l)
            r, _ = residual_norm(prod, K, tol)
            if r > worst:
                worst, where = r, (i, j, k, l)
        pairs = {(i, j) for i, j, _, _ in quads} | {(j, i) for i, j, _, _ in quads}
        star = max((adjoint(self.e(i, j)) - self.e(j, i)).max_abs() for i, j in pairs)
        e11 = self.diag[1]
        w = self.corner_unitary
        e21 = self.e21
        e22 = self.diag[2] if q > 1 else e11
        return {
            "matrix_unit_sweep": worst,
            "worst_indices": where,
            "sweep_size": len(quads),
            "sweep_exhaustive": q <= SWEEP_FULL_MAX,
            "adjoint_coeff": star,
            "corner_ww*": residual_norm(nmul(w, adjoint(w)) - e11, K, tol)[0],
            "corner_w*w": residual_norm(nmul(adjoint(w), w) - e11, K, tol)[0],
            "e21*e21-e11": residual_norm(nmul(adjoint(e21), e21) - e11, K, tol)[0],
            "e21e21*-e22": residual_norm(nmul(e21, adjoint(e21)) - e22, K, tol)[0],
            "literal_defect": residual_norm(self.e21_raw - e21, K, tol)[0],
            "polar_iterations": self.polar_iterations,
        }


@lru_cache(maxsize=16)
def _units_cached(key: tuple, role: str, M: int, mode: str, K: int) -> MatrixUnitSet:
    level = _LEVELS[key]
    spec = side_spec(level, role)
    th = _theta(level)
    fam = family(level, role, M, mode)
    q = spec.q
    alpha = lambda x, k: act_root(x, k * spec.step_p, q, spec.axis)  # noqa: E731
    carrier = TorusElement.monomial(th, *spec.carrier)
    raw = nmul(nmul(fam[1 % q], carrier), fam[0]).pruned(PRUNE)
    size = norm_estimate(raw, K)[0]
    if size < 0.5:
        raise DegenerateCorner(f"||e22 V e11|| = {size:.3f} < 0.5")
    e21, iters = polar_part(raw)
    diag = {k: fam[k - 1] for k in range(1, q + 1)}
    # e_{k+1,k} = alpha^{k-1}(e21); e_{i1} by chaining down to 1
    col1 = {1: fam[0]}
    for i in range(2, q + 1):
        col1[i] = nmul(alpha(e21, i - 2), col1[i - 1]).pruned(PRUNE)
    corner = nmul(alpha(e21, q - 1), col1[q]).pruned(PRUNE) if q > 1 else fam[0]
    return MatrixUnitSet(role, q, col1, diag, corner, e21, raw, iters, spec)


def matrix_units(level: LevelData, side: str = "principal", M: int = DEFAULT_M,
                 mode: str = DEFAULT_MODE, K: int = DEFAULT_K) -> MatrixUnitSet:
    return _units_cached(_remember(level), side, int(M), mode, int(K))


# approximants ----------------------------------------------------------------------

@lru_cache(maxsize=8)
def _approx_cached(key: tuple, M: int, mode: str, K: int):
    level = _LEVELS[key]
    th = _theta(level)
    out = {}
    for role in ("principal", "dual"):
        mu = matrix_units(level, role, M, mode, K)
        spec = mu.spec
        q = spec.q
        r0, r1 = spec.r
        diag = TorusElement.zero(th)
        shift = TorusElement.zero(th)
        e21 = mu.e21
        for j in range(q):
            # eigenvalue of U on the j-th translate
            lam = np.exp(-2j * np.pi * ((j * spec.step_p) % q) / q)
            diag = diag + mu.diag[j + 1] * lam
            shift = shift + act_root(e21, j * spec.step_p, q, spec.axis)
        out[role] = (diag, shift, mu)
    u1, v1 = out["principal"][0], out["principal"][1]
    v2, u2 = out["dual"][0], out["dual"][1]
    return u1, v1, u2, v2


def approx_generators(level: LevelData, M: int = DEFAULT_M, mode: str = DEFAULT_MODE,
                      K: int = DEFAULT_K) -> Tuple[TorusElement, TorusElement, dict]:
    """u_n = u_{n,1} + u_{n,2}, v_n = v_{n,1} + v_{n,2} with a residual report."""
    key = _remember(level)
    u1, v1, u2, v2 = _approx_cached(key, int(M), mode, int(K))
    th = u1.theta
    u = TorusElement.monomial(th, 1, 0)
    v = TorusElement.monomial(th, 0, 1)
    fam = family(level, "principal", M, mode)
    fam_d = family(level, "dual", M, mode)
    e1, e2 = complementary_pair(fam, fam_d)
    one_e2 = TorusElement.one(th) - e2
    r = level.p / level.q
    rp = level.pp / level.qp
    ph, php = np.exp(2j * np.pi * r), np.exp(2j * np.pi * rp)

    bounds: Dict[str, list] = {}
    methods: Dict[str, str] = {}
    report: dict = {"M": M, "K": K, "mode": mode,
                    "r": [level.p, level.q], "r_prime": [level.pp, level.qp]}
    # expand u_n u_n* so every product has one structured (few-row or few-column) factor
    u11, u22 = nmul(u1, adjoint(u1)), nmul(u2, adjoint(u2))
    u12 = nmul(u1, adjoint(u2))
    terms = {
        "commutation_1": nmul(u1, v1) - nmul(v1, u1) * ph,
        "commutation_2": nmul(u2, v2) - nmul(v2, u2) * php,
        "u1u1*-(1-e2)": u11 - one_e2,
        "v1v1*-(1-e2)": nmul(v1, adjoint(v1)) - one_e2,
        "u2u2*-e1": u22 - e1,
        "v2v2*-e1": nmul(v2, adjoint(v2)) - e1,
        "cross_u1u2": nmul(u1, u2),
        "cross_v1v2": nmul(v1, v2),
        "unitarity_un": u11 + u22 + u12 + adjoint(u12) - 1.0,
        "corner_u(1-e2)-u1": nmul(u, one_e2) - u1,
        "corner_ue1-u2": nmul(u, e1) - u2,
        "corner_v(1-e2)-v1": nmul(v, one_e2) - v1,
        "corner_ve1-v2": nmul(v, e1) - v2,
        "e1-e2": e1 - e2,
    }
    for name, x in terms.items():
        val, how = norm_estimate(x, K)
        report[name] = val
        methods[name] = how
        bounds[name] = [max(norm_lower(x), val if how == "window" else 0.0), norm_upper(x)]
    report["methods"] = methods
    report["bounds"] = bounds
    return u1 + u2, v1 + v2, report


def convergence_report(levels: Sequence[LevelData], k: int = 0, l: int = 0,
                       K: int = DEFAULT_K, M: int | Sequence[int] = DEFAULT_M,
                       mode: str = DEFAULT_MODE, prune: float = 1e-8) -> dict:
    """Rows (n, ||u - u_n||_{k,l}, ||v - v_n||_{k,l}) and a strict-decrease flag.

    Coefficients below ``prune`` are dropped before the window norm; their l1
    mass is reported as ``slack`` and bounds the change this causes.  The
    window is widened to four times the bandwidth of what remains.  Each row
    also carries the certified [2-norm, l1] bracket of the unpruned element.
    """
    Ms = [M] * len(levels) if isinstance(M, int) else list(M)
    rows = []
    for lv, m in zip(levels, Ms):
        un, vn, _ = approx_generators(lv, m, mode, K)
        th = un.theta
        u = TorusElement.monomial(th, 1, 0)
        v = TorusElement.monomial(th, 0, 1)
        row = {"n": lv.n, "k": k, "l": l, "K": K, "M": m}
        for name, x in (("u", u - un), ("v", v - vn)):
            d = derive(x, k, l)
            dp = d.pruned(prune)
            row[name], row[f"K_{name}"] = opnorm_auto(dp, K)
            row[f"{name}_slack"] = norm_upper(d - dp)
            row[f"{name}_bounds"] = [norm_lower(d), norm_upper(d)]
        rows.append(row)
    out = {"rows": rows, "prune": prune}
    if len(rows) > 1:
        for name in ("u", "v"):
            pairs = list(zip(rows, rows[1:]))
            out[f"decreasing_{name}"] = all(b[name] < a[name] for a, b in pairs)
            out[f"certified_decreasing_{name}"] = all(
                b[name] + b[f"{name}_slack"] < a[name] - a[f"{name}_slack"] for a, b in pairs)
    return out


def table_csv(report: dict) -> str:
    lines = ["n,k,l,K,M,generator,value,slack"]
    for r in report["rows"]:
        for g in ("u", "v"):
            lines.append(f"{r['n']},{r['k']},{r['l']},{r[f'K_{g}']},{r['M']},{g},{r[g]!r},"
                         f"{r[f'{g}_slack']!r}")
    return "\n".join(lines) + "\n"

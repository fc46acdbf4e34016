"""Finite-level AT algebras M_{q_even}(C(T)) + M_{q_odd}(C(T)) over Laurent
polynomials, the block embeddings between consecutive levels, and the
pullbacks of the trace and odd cocycle functionals along them.

A Laurent matrix is stored as {degree: sparse matrix}.  The embedding sends
X + Y to diag(X(J_a), Y(J_b)) + diag(X(J'_c), Y(J'_d)), where X(J) substitutes
the a x a unitary J for z entrywise (z^k -> J^k, scalars -> x I).  J_a is the
cyclic lower shift with z in its top-right corner (J_a^a = z I); J'_c is the
constant cyclic permutation (J'_c^c = I).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import LevelMismatch, RankDeficientSamples
from .numbertheory import LevelData

TWO_PI_I = 2j * math.pi


class LaurentMatrix:
    """Square matrix with Laurent-polynomial entries, sum_k A_k z^k."""

    __slots__ = ("size", "terms")

    def __init__(self, size: int, terms: Dict[int, sp.spmatrix] | None = None):
        self.size = int(size)
        self.terms: Dict[int, sp.csr_matrix] = {}
        for k, A in (terms or {}).items():
            A = sp.csr_matrix(A, dtype=complex)
            if A.shape != (self.size, self.size):
                raise LevelMismatch(f"term of shape {A.shape} in a {self.size}x{self.size} matrix")
            A.eliminate_zeros()
            if A.nnz:
                self.terms[int(k)] = A

    @classmethod
    def scalar(cls, size: int, c: complex = 1.0) -> "LaurentMatrix":
        return cls(size, {0: sp.identity(size, dtype=complex, format="csr") * c})

    @classmethod
    def zero(cls, size: int) -> "LaurentMatrix":
        return cls(size)

    @classmethod
    def from_dense(cls, terms: Dict[int, np.ndarray]) -> "LaurentMatrix":
        size = next(iter(terms.values())).shape[0]
        return cls(size, {k: sp.csr_matrix(v) for k, v in terms.items()})

    def __add__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check(other)
        out = dict(self.terms)
        for k, A in other.terms.items():
            out[k] = out[k] + A if k in out else A
        return LaurentMatrix(self.size, out)

    def __neg__(self) -> "LaurentMatrix":
        return LaurentMatrix(self.size, {k: -A for k, A in self.terms.items()})

    def __sub__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        return self + (-other)

    def scale(self, c: complex) -> "LaurentMatrix":
        return LaurentMatrix(self.size, {k: A * c for k, A in self.terms.items()})

    def __matmul__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check(other)
        out: Dict[int, sp.csr_matrix] = {}
        for i, A in self.terms.items():
            for j, B in other.terms.items():
                P = A @ B
                out[i + j] = out[i + j] + P if i + j in out else P
        return LaurentMatrix(self.size, out)

    def adjoint(self) -> "LaurentMatrix":
        return LaurentMatrix(self.size, {-k: A.conj().T.tocsr() for k, A in self.terms.items()})

    def _check(self, other: "LaurentMatrix") -> None:
        if self.size != other.size:
            raise LevelMismatch(f"sizes {self.size} and {other.size} differ")

    def max_abs(self) -> float:
        return max((float(np.abs(A.data).max()) for A in self.terms.values() if A.nnz), default=0.0)

    def integral_trace(self) -> complex:
        A = self.terms.get(0)
        return complex(A.diagonal().sum()) if A is not None else 0j

    def degrees(self) -> Tuple[int, int]:
        if not self.terms:
            return (0, 0)
        return min(self.terms), max(self.terms)

    def to_json(self) -> list:
        out = []
        for k in sorted(self.terms):
            A = self.terms[k].tocoo()
            order = np.lexsort((A.col, A.row))
            for t in order:
                c = complex(A.data[t])
                out.append({"deg": int(k), "i": int(A.row[t]), "j": int(A.col[t]),
                            "re": repr(c.real), "im": repr(c.imag)})
        return out


def _block_diag(parts: Sequence[LaurentMatrix]) -> LaurentMatrix:
    parts = [p for p in parts if p.size > 0]
    size = sum(p.size for p in parts)
    degs = sorted({k for p in parts for k in p.terms})
    out = {}
    for k in degs:
        blocks = [p.terms.get(k, sp.csr_matrix((p.size, p.size), dtype=complex)) for p in parts]
        out[k] = sp.block_diag(blocks, format="csr")
    return LaurentMatrix(size, out)


@dataclass
class ATElement:
    first: LaurentMatrix
    second: LaurentMatrix

    @property
    def sizes(self) -> Tuple[int, int]:
        return (self.first.size, self.second.size)

    @classmethod
    def identity(cls, sizes: Tuple[int, int]) -> "ATElement":
        return cls(LaurentMatrix.scalar(sizes[0]), LaurentMatrix.scalar(sizes[1]))

    @classmethod
    def zero(cls, sizes: Tuple[int, int]) -> "ATElement":
        return cls(LaurentMatrix.zero(sizes[0]), LaurentMatrix.zero(sizes[1]))

    def __add__(self, other: "ATElement") -> "ATElement":
        return ATElement(self.first + other.first, self.second + other.second)

    def __sub__(self, other: "ATElement") -> "ATElement":
        return ATElement(self.first - other.first, self.second - other.second)

    def scale(self, c: complex) -> "ATElement":
        return ATElement(self.first.scale(c), self.second.scale(c))

    def max_abs(self) -> float:
        return max(self.first.max_abs(), self.second.max_abs())

    def to_json(self) -> dict:
        return {"sizes": [str(s) for s in self.sizes],
                "first": self.first.to_json(), "second": self.second.to_json()}


def _same(x: ATElement, y: ATElement) -> None:
    if x.sizes != y.sizes:
        raise LevelMismatch(f"levels differ: {x.sizes} vs {y.sizes}")


def at_mul(x: ATElement, y: ATElement) -> ATElement:
    _same(x, y)
    return ATElement(x.first @ y.first, x.second @ y.second)


def at_adjoint(x: ATElement) -> ATElement:
    return ATElement(x.first.adjoint(), x.second.adjoint())


def tau_pair(x: ATElement) -> Tuple[complex, complex]:
    """(integral tensor Tr) on each summand; Tr unnormalised."""
    return x.first.integral_trace(), x.second.integral_trace()


def level_sizes(level: LevelData) -> Tuple[int, int]:
    return (level.q_even, level.q_odd)


# generator images -----------------------------------------------------------

@lru_cache(maxsize=256)
def j_power(size: int, k: int, twisted: bool) -> LaurentMatrix:
    """k-th power of J_size (twisted: z in the corner) or J'_size (constant)."""
    S = sp.diags([np.ones(size - 1)], [-1], shape=(size, size), format="csr", dtype=complex)
    corner = sp.csr_matrix(([1.0 + 0j], ([0], [size - 1])), shape=(size, size))
    if twisted:
        J = LaurentMatrix(size, {0: S, 1: corner})
    else:
        J = LaurentMatrix(size, {0: S + corner})
    if k == 0:
        return LaurentMatrix.scalar(size)
    if k < 0:
        return j_power(size, -k, twisted).adjoint()
    if k == 1:
        return J
    half = j_power(size, k // 2, twisted)
    out = half @ half
    return out @ J if k % 2 else out


def substitute(X: LaurentMatrix, size: int, twisted: bool) -> LaurentMatrix:
    """X(J): entrywise z^k -> J^k, a block matrix of shape (X.size*size)^2."""
    out: Dict[int, sp.csr_matrix] = {}
    for k, A in X.terms.items():
        Jk = j_power(size, k, twisted)
        for d, B in Jk.terms.items():
            P = sp.kron(A, B, format="csr")
            out[d] = out[d] + P if d in out else P
    return LaurentMatrix(X.size * size, out)


@dataclass(frozen=True)
class Embedding:
    level: int
    a: int
    b: int
    c: int
    d: int
    source: Tuple[int, int]

    @property
    def target(self) -> Tuple[int, int]:
        qe, qo = self.source
        return (self.a * qe + self.b * qo, self.c * qe + self.d * qo)

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    @classmethod
    def from_level(cls, level: LevelData) -> "Embedding":
        a, b, c, d = level.trans
        return cls(level.n, a, b, c, d, level_sizes(level))

    def check(self, next_level: LevelData | None = None) -> List[str]:
        bad = []
        if self.det != 1:
            bad.append("det")
        if next_level is not None and self.target != level_sizes(next_level):
            bad.append("block_sizes")
        return bad

    def __call__(self, x: ATElement) -> ATElement:
        return embed(self, x)

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])


def embed(e: Embedding, x: ATElement) -> ATElement:
    if x.sizes != e.source:
        raise LevelMismatch(f"element of sizes {x.sizes} does not sit at level {e.level} {e.source}")
    first = _block_diag([substitute(x.first, e.a, True), substitute(x.second, e.b, True)]) \
        if e.a or e.b else LaurentMatrix.zero(0)
    second = _block_diag([substitute(x.first, e.c, False), substitute(x.second, e.d, False)])
    return ATElement(first, second)


@dataclass(frozen=True)
class Composite:
    """Composition of consecutive embeddings (applied left to right)."""

    steps: Tuple[Embedding, ...]

    @property
    def source(self) -> Tuple[int, int]:
        return self.steps[0].source

    @property
    def target(self) -> Tuple[int, int]:
        return self.steps[-1].target

    def __call__(self, x: ATElement) -> ATElement:
        for s in self.steps:
            x = s(x)
        return x


# random samples -------------------------------------------------------------

def random_laurent(rng: np.random.Generator, size: int, degree: int,
                   nnz: int | None = None) -> LaurentMatrix:
    """Random Laurent matrix with degrees in [-degree, degree].

    Small sizes are dense; otherwise ``nnz`` random entries per degree plus a
    random diagonal so that traces are generic.
    """
    terms = {}
    dense = nnz is None and size <= 64
    for k in range(-degree, degree + 1):
        if dense:
            terms[k] = sp.csr_matrix(rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size)))
        else:
            m = nnz or 32
            rows = rng.integers(0, size, m)
            cols = rng.integers(0, size, m)
            vals = rng.normal(size=m) + 1j * rng.normal(size=m)
            A = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
            diag = rng.normal(size=size) + 1j * rng.normal(size=size)
            terms[k] = A + sp.diags(diag, 0, format="csr")
    return LaurentMatrix(size, terms)


def random_element(rng: np.random.Generator, sizes: Tuple[int, int], degree: int = 0,
                   nnz: int | None = None) -> ATElement:
    return ATElement(random_laurent(rng, sizes[0], degree, nnz),
                     random_laurent(rng, sizes[1], degree, nnz))


# pullbacks -------------------------------------------------------------------

@dataclass
class Pullback:
    matrix: np.ndarray
    residual: float
    samples: int
    mode: str

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def integer_matrix(self, tol: float = 1e-6) -> np.ndarray | None:
        R = np.rint(self.matrix.real)
        if np.abs(self.matrix - R).max() < tol:
            return R.astype(int)
        return None

    @property
    def invertible(self) -> bool:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return bool(s[-1] > 1e-9 * max(1.0, s[0]))

    def to_json(self) -> dict:
        R = self.integer_matrix()
        exact = R is not None and self.residual < 1e-9
        if exact:
            mat = [[str(int(v)) for v in row] for row in R]
            det = str(int(round(np.linalg.det(R))))
        else:
            mat = [[[repr(v.real), repr(v.imag)] for v in row] for row in self.matrix]
            det = [repr(self.det.real), repr(self.det.imag)]
        return {"matrix": mat, "exact_integers": exact, "det": det,
                "residual": repr(self.residual), "samples": self.samples, "mode": self.mode,
                "invertible": self.invertible}


def _fit(src: np.ndarray, tgt: np.ndarray, mode: str) -> Pullback:
    """Solve tgt = src @ M^T for the 2x2 matrix M."""
    if np.linalg.matrix_rank(src, tol=1e-9 * max(1.0, np.abs(src).max())) < 2:
        raise RankDeficientSamples("samples do not separate the two source functionals")
    sol, *_ = np.linalg.lstsq(src, tgt, rcond=None)
    M = sol.T
    resid = float(np.abs(src @ M.T - tgt).max() / max(1.0, np.abs(tgt).max()))
    return Pullback(M, resid, src.shape[0], mode)


def trace_pullback(e: Embedding | Composite, samples: int = 8, seed: int = 0,
                   mode: str = "constant", degree: int = 3) -> Pullback:
    """Matrix of (tau_even', tau_odd') o embed in the basis (tau_even, tau_odd).

    ``constant`` samples scalar matrices; ``laurent`` samples entries of the
    given degree and reports how far the functionals are from an exact
    pullback at the cochain level.
    """
    if samples < 4:
        raise ValueError("need at least 4 samples")
    rng = np.random.default_rng(seed)
    src, tgt = [], []
    for _ in range(samples):
        x = random_element(rng, e.source, 0 if mode == "constant" else degree)
        src.append(tau_pair(x))
        tgt.append(tau_pair(e(x)))
    return _fit(np.array(src), np.array(tgt), mode)


def psi(f: Dict[int, complex], g: Dict[int, complex]) -> complex:
    """Integral of f dg over the circle for Laurent polynomials (term rule
    z^j, z^k -> 2 pi i k when j + k = 0)."""
    return sum(TWO_PI_I * k * ck * f.get(-k, 0) for k, ck in g.items())


def psi_coboundary(f, g, h) -> complex:
    """(b psi)(f, g, h) = psi(fg, h) - psi(f, gh) + psi(hf, g)."""
    def mul(p, r):
        out: Dict[int, complex] = {}
        for i, a in p.items():
            for j, b in r.items():
                out[i + j] = out.get(i + j, 0) + a * b
        return out
    return psi(mul(f, g), h) - psi(f, mul(g, h)) + psi(mul(h, f), g)


def psi_tr(A: LaurentMatrix, B: LaurentMatrix) -> complex:
    """(psi tensor Tr)(A, B) = sum_k 2 pi i k Tr(A_{-k} B_k)."""
    total = 0j
    for k, Bk in B.terms.items():
        Ak = A.terms.get(-k)
        if Ak is None or k == 0:
            continue
        total += TWO_PI_I * k * complex((Ak.multiply(Bk.T)).sum())
    return total


def psi_pair(x: ATElement, y: ATElement) -> Tuple[complex, complex]:
    return psi_tr(x.first, y.first), psi_tr(x.second, y.second)


def odd_pullback(e: Embedding | Composite, samples: int = 8, seed: int = 0,
                 degree: int = 2) -> Pullback:
    """Matrix of the pulled-back odd functionals (psi tensor Tr) o (embed x embed)."""
    if samples < 4:
        raise ValueError("need at least 4 samples")
    rng = np.random.default_rng(seed)
    src, tgt = [], []
    for _ in range(samples):
        x = random_element(rng, e.source, degree)
        y = random_element(rng, e.source, degree)
        src.append(psi_pair(x, y))
        tgt.append(psi_pair(e(x), e(y)))
    return _fit(np.array(src), np.array(tgt), "odd")


def homomorphism_residuals(e: Embedding, samples: int = 20, seed: int = 0,
                           degree: int = 3, nnz: int | None = None) -> dict:
    """Unitality, multiplicativity and *-compatibility defects on random samples."""
    rng = np.random.default_rng(seed)
    one = ATElement.identity(e.source)
    unit = (embed(e, one) - ATElement.identity(e.target)).max_abs()
    mult = star = 0.0
    for _ in range(samples):
        x = random_element(rng, e.source, degree, nnz)
        y = random_element(rng, e.source, degree, nnz)
        ex, ey = embed(e, x), embed(e, y)
        scale = max(1.0, ex.max_abs() * ey.max_abs())
        mult = max(mult, (embed(e, at_mul(x, y)) - at_mul(ex, ey)).max_abs() / scale)
        star = max(star, (embed(e, at_adjoint(x)) - at_adjoint(ex)).max_abs() / max(1.0, ex.max_abs()))
    return {"unitality": unit, "multiplicativity": mult, "star": star, "samples": samples}

"""(b, B) cochain machinery on finite-dimensional algebras.

Cochains of degree n are dense (n+1)-tensors over a basis.  Conventions, on
all (not necessarily normalised) cochains:

    (b phi)(a0..a_{n+1}) = sum_{j=0}^{n} (-1)^j phi(.., a_j a_{j+1}, ..)
                           + (-1)^{n+1} phi(a_{n+1} a0, a1, .., a_n)
    B = A o B0,  (B0 phi)(a0..a_{n-1}) = phi(1, a0, ..) - (-1)^n phi(a0, .., a_{n-1}, 1)
    A = sum_j lambda^j,  (lambda psi)(a0..a_{m}) = (-1)^m psi(a_m, a0, .., a_{m-1})
"""
from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import (BudgetExceeded, DegreeUnderflow, MissingSeminorm,
                     NotIdempotent, ShapeMismatch)

LETTERS = string.ascii_letters


# algebras ---------------------------------------------------------------------

@dataclass
class FdAlgebra:
    """Direct sum of full matrix algebras M_{n_1} + ... + M_{n_r}.

    The basis consists of the matrix units of each block, in block order and
    row-major within a block.  Structure constants are built on demand.
    """

    blocks: Tuple[int, ...]
    seminorms: Dict[int, Callable[[np.ndarray], float]] = field(default_factory=dict)
    _structure: np.ndarray | None = field(default=None, repr=False)
    perm: np.ndarray | None = field(default=None, repr=False)  # optional basis relabelling

    @property
    def dim(self) -> int:
        return sum(n * n for n in self.blocks)

    @property
    def offsets(self) -> List[int]:
        out, s = [], 0
        for n in self.blocks:
            out.append(s)
            s += n * n
        return out

    # coordinates <-> block matrices
    def to_blocks(self, x: np.ndarray) -> List[np.ndarray]:
        x = np.asarray(x, dtype=complex)
        if self.perm is not None:
            y = np.empty_like(x)
            y[self.perm] = x
            x = y
        return [x[o:o + n * n].reshape(n, n) for o, n in zip(self.offsets, self.blocks)]

    def from_blocks(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        x = np.concatenate([np.asarray(m, dtype=complex).ravel() for m in mats])
        return x[self.perm] if self.perm is not None else x

    def mul(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.from_blocks([a @ b for a, b in zip(self.to_blocks(x), self.to_blocks(y))])

    def star(self, x: np.ndarray) -> np.ndarray:
        return self.from_blocks([a.conj().T for a in self.to_blocks(x)])

    @property
    def unit(self) -> np.ndarray:
        return self.from_blocks([np.eye(n) for n in self.blocks])

    def basis(self, i: int) -> np.ndarray:
        e = np.zeros(self.dim, dtype=complex)
        e[i] = 1
        return e

    @property
    def structure(self) -> np.ndarray:
        """c[i, j, k] with e_i e_j = sum_k c[i, j, k] e_k."""
        if self._structure is None:
            d = self.dim
            if d ** 3 > 20_000_000:
                raise BudgetExceeded(f"structure tensor of dim {d} too large")
            c = np.zeros((d, d, d), dtype=complex)
            for i in range(d):
                ei = self.basis(i)
                for j in range(d):
                    c[i, j] = self.mul(ei, self.basis(j))
            self._structure = c
        return self._structure

    def permuted(self, perm: np.ndarray) -> "FdAlgebra":
        """Same algebra with basis vector i relabelled perm[i]."""
        base = np.arange(self.dim) if self.perm is None else self.perm
        return FdAlgebra(self.blocks, dict(self.seminorms), None, np.asarray(perm)[base])

    def opnorm(self, x: np.ndarray) -> float:
        return max(np.linalg.norm(a, 2) for a in self.to_blocks(x))

    def check(self) -> dict:
        c = self.structure
        assoc = np.abs(np.einsum("ijm,mkl->ijkl", c, c) - np.einsum("jkm,iml->ijkl", c, c)).max()
        one = self.unit
        left = np.abs(np.einsum("i,ijk->jk", one, c) - np.eye(self.dim)).max()
        right = np.abs(np.einsum("j,ijk->ik", one, c) - np.eye(self.dim)).max()
        return {"associativity": float(assoc), "unit": float(max(left, right))}


def matrix_algebra(n: int) -> FdAlgebra:
    alg = FdAlgebra((n,))
    alg.seminorms[0] = alg.opnorm
    return alg


def direct_sum(*algs: FdAlgebra) -> FdAlgebra:
    blocks = tuple(b for a in algs for b in a.blocks)
    alg = FdAlgebra(blocks)
    alg.seminorms[0] = alg.opnorm
    return alg


def point() -> FdAlgebra:
    return matrix_algebra(1)


# cochains ---------------------------------------------------------------------

@dataclass
class Cochain:
    degree: int
    algebra: FdAlgebra
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        shape = (self.algebra.dim,) * (self.degree + 1)
        if self.values.shape != shape:
            raise ShapeMismatch(f"values of shape {self.values.shape}, expected {shape}")

    def __call__(self, *args: np.ndarray) -> complex:
        if len(args) != self.degree + 1:
            raise ShapeMismatch(f"degree-{self.degree} cochain takes {self.degree + 1} arguments")
        t = self.values
        for a in args:
            t = np.tensordot(np.asarray(a, dtype=complex), t, axes=(0, 0))
        return complex(t)

    def __add__(self, other: "Cochain") -> "Cochain":
        return Cochain(self.degree, self.algebra, self.values + other.values)

    def __sub__(self, other: "Cochain") -> "Cochain":
        return Cochain(self.degree, self.algebra, self.values - other.values)

    def scale(self, c: complex) -> "Cochain":
        return Cochain(self.degree, self.algebra, c * self.values)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    @classmethod
    def random(cls, alg: FdAlgebra, degree: int, rng: np.random.Generator) -> "Cochain":
        shape = (alg.dim,) * (degree + 1)
        return cls(degree, alg, rng.normal(size=shape) + 1j * rng.normal(size=shape))

    def to_json(self) -> dict:
        flat = self.values.ravel()
        return {"degree": self.degree, "shape": list(self.values.shape),
                "re": [repr(float(v)) for v in flat.real], "im": [repr(float(v)) for v in flat.imag]}


def trace_cochain(alg: FdAlgebra, weights: Sequence[float] | None = None) -> Cochain:
    """Degree-0 cochain sum_r w_r Tr(block r)."""
    weights = weights or [1.0] * len(alg.blocks)
    mats = [w * np.eye(n) for w, n in zip(weights, alg.blocks)]
    return Cochain(0, alg, alg.from_blocks(mats))


# tensor operators (leading batch axis) ----------------------------------------

def _b_tensor(T: np.ndarray, c: np.ndarray, n: int) -> np.ndarray:
    """b on a batch of degree-n cochains: T[..., i0..in] -> [..., i0..i_{n+1}]."""
    idx = LETTERS[:n + 2]
    out = 0
    for j in range(n + 1):
        src = idx[:j] + "Z" + idx[j + 2:]
        term = np.einsum(f"...{src},{idx[j]}{idx[j + 1]}Z->...{idx}", T, c)
        out = out + (-1) ** j * term
    src = "Z" + idx[1:n + 1]
    term = np.einsum(f"...{src},{idx[n + 1]}{idx[0]}Z->...{idx}", T, c)
    return out + (-1) ** (n + 1) * term


def _B_tensor(T: np.ndarray, one: np.ndarray, n: int) -> np.ndarray:
    """B on a batch of degree-n cochains (n >= 1)."""
    nb = T.ndim - (n + 1)
    # B0: contract unit into slot 0 and into slot n
    first = np.tensordot(T, one, axes=([nb], [0]))          # (batch, i1..in)
    last = np.tensordot(T, one, axes=([T.ndim - 1], [0]))  # (batch, i0..i_{n-1})
    psi = first - (-1) ** n * last                          # degree n-1
    m = n - 1
    out = np.zeros_like(psi)
    cur = psi
    for _ in range(n):
        out = out + cur
        # (lambda psi)(a0..am) = (-1)^m psi(a_m, a0, .., a_{m-1})
        cur = (-1) ** m * np.moveaxis(cur, nb, nb + m)
    return out


def hochschild_b(phi: Cochain) -> Cochain:
    c = phi.algebra.structure
    return Cochain(phi.degree + 1, phi.algebra, _b_tensor(phi.values, c, phi.degree))


def connes_B(phi: Cochain) -> Cochain:
    if phi.degree < 1:
        raise DegreeUnderflow("B lowers degree; degree-0 cochains map to the empty degree -1")
    return Cochain(phi.degree - 1, phi.algebra, _B_tensor(phi.values, phi.algebra.unit, phi.degree))


# restriction --------------------------------------------------------------------

def restrict(phi: Cochain, along: np.ndarray, source: FdAlgebra) -> Cochain:
    """Pullback along a homomorphism given as a (target dim x source dim) matrix."""
    H = np.asarray(along, dtype=complex)
    if H.shape != (phi.algebra.dim, source.dim):
        raise ShapeMismatch(f"map of shape {H.shape}, expected {(phi.algebra.dim, source.dim)}")
    T = phi.values
    for _ in range(phi.degree + 1):
        # contract the leading target slot, append the source slot at the end
        T = np.tensordot(T, H, axes=([0], [0]))
    return Cochain(phi.degree, source, T)


def homomorphism_matrix(source: FdAlgebra, target: FdAlgebra,
                        image: Callable[[List[np.ndarray]], List[np.ndarray]]) -> np.ndarray:
    """Matrix of a homomorphism given on block matrices."""
    H = np.zeros((target.dim, source.dim), dtype=complex)
    for i in range(source.dim):
        H[:, i] = target.from_blocks(image(source.to_blocks(source.basis(i))))
    return H


# families and growth --------------------------------------------------------------

@dataclass
class CochainFamily:
    parity: str
    members: List[Cochain]
    growth_log: List[dict] = field(default_factory=list)

    def __post_init__(self):
        want = 0 if self.parity == "even" else 1
        degs = [m.degree for m in self.members]
        if any(d % 2 != want for d in degs) or any(b - a != 2 for a, b in zip(degs, degs[1:])):
            raise ShapeMismatch(f"degrees {degs} do not form a {self.parity} family")


def tensor_power_family(phi0: Cochain, count: int) -> CochainFamily:
    """phi_{2k} = phi0^{tensor (2k+1)} for k < count."""
    members = []
    for k in range(count):
        T = phi0.values
        for _ in range(2 * k):
            T = np.multiply.outer(T, phi0.values)
        members.append(Cochain(2 * k, phi0.algebra, T))
    return CochainFamily("even", members)


GROWTH_RATIO = 1.5


def entire_check(fam: CochainFamily, bounded_set: Sequence[np.ndarray], trials: int = 200,
                 seed: int = 0) -> dict:
    """Estimate sup |phi_{2k}| over tuples from ``bounded_set`` and compare with k!.

    The family is flagged when r_k = sup_k / k! grows super-geometrically:
    consecutive ratios r_{k+1}/r_k are above 1.5 and do not decrease.
    """
    rng = np.random.default_rng(seed)
    pool = [np.asarray(a, dtype=complex) for a in bounded_set]
    rows = []
    for phi in fam.members:
        k = phi.degree // 2
        best = 0.0
        for t in range(trials):
            args = [pool[rng.integers(len(pool))] for _ in range(phi.degree + 1)]
            if t == 0:
                args = [pool[0]] * (phi.degree + 1)
            best = max(best, abs(phi(*args)))
        rows.append({"degree": phi.degree, "sup": best, "ratio": best / math.factorial(k)})
    fam.growth_log = rows
    ratios = [r["ratio"] for r in rows]
    C = max(ratios) if ratios else 0.0
    if len(rows) < 3:
        return {"verdict": "insufficient degrees", "entire": True, "C": C, "rows": rows}
    steps = [b / a if a > 0 else (math.inf if b > 0 else 0.0) for a, b in zip(ratios, ratios[1:])]
    growing = steps[-1] > GROWTH_RATIO and steps[-1] >= steps[-2]
    return {"verdict": "not entire" if growing else "entire", "entire": not growing,
            "C": C, "rows": rows, "ratio_steps": steps}


# seminorms ------------------------------------------------------------------------

def cochain_seminorm(phi: Cochain, l: int = 0, trials: int = 200, seed: int = 0,
                     climb_steps: int = 200) -> float:
    """Randomised lower bound for sup |phi(a0..an)| over ||a_j||_l <= 1."""
    alg = phi.algebra
    if l not in alg.seminorms:
        raise MissingSeminorm(f"algebra has no seminorm of index {l}")
    nrm = alg.seminorms[l]
    rng = np.random.default_rng(seed)
    d = alg.dim

    def unitize(x):
        s = nrm(x)
        return x / s if s > 0 else x

    cands = [unitize(alg.unit)] + [unitize(alg.basis(i)) for i in range(d)]
    best, best_args = 0.0, None
    for t in range(trials):
        if t < len(cands):
            args = [cands[t]] * (phi.degree + 1)
        else:
            args = [unitize(rng.normal(size=d) + 1j * rng.normal(size=d)) for _ in range(phi.degree + 1)]
        val = abs(phi(*args))
        if val > best:
            best, best_args = val, args
    if best_args is None:
        return 0.0
    args = list(best_args)
    step = 0.5
    for _ in range(climb_steps):
        j = rng.integers(len(args))
        trial = list(args)
        trial[j] = unitize(args[j] + step * (rng.normal(size=d) + 1j * rng.normal(size=d)))
        val = abs(phi(*trial))
        if val > best:
            best, args = val, trial
        else:
            step *= 0.97
    return float(best)


# periodic cyclic cohomology by brute force ------------------------------------------

DEFAULT_BUDGET = 30_000_000


def _operator_matrix(alg: FdAlgebra, n: int, which: str) -> np.ndarray:
    """Matrix of b (C^n -> C^{n+1}) or B (C^n -> C^{n-1}) on flattened tensors."""
    d = alg.dim
    N = d ** (n + 1)
    basis = np.eye(N, dtype=complex).reshape((N,) + (d,) * (n + 1))
    if which == "b":
        out = _b_tensor(basis, alg.structure, n)
    else:
        out = _B_tensor(basis, alg.unit, n)
    return out.reshape(N, -1).T


def _total_differential(alg: FdAlgebra, n: int) -> np.ndarray:
    """d = b + B : Tot^n -> Tot^{n+1}, Tot^n = C^n + C^{n-2} + ..."""
    d = alg.dim
    src = [n - 2 * k for k in range(n // 2 + 1)]
    tgt = [n + 1 - 2 * k for k in range((n + 1) // 2 + 1)]
    so = np.cumsum([0] + [d ** (m + 1) for m in src])
    to = np.cumsum([0] + [d ** (m + 1) for m in tgt])
    D = np.zeros((to[-1], so[-1]), dtype=complex)
    for i, m in enumerate(src):
        j = tgt.index(m + 1)
        D[to[j]:to[j + 1], so[i]:so[i + 1]] = _operator_matrix(alg, m, "b")
        if m >= 1:
            j = tgt.index(m - 1)
            D[to[j]:to[j + 1], so[i]:so[i + 1]] += _operator_matrix(alg, m, "B")
    return D


def _rank(A: np.ndarray, tol: float = 1e-9) -> int:
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int((s > tol * max(1.0, s[0])).sum())


def hp_bruteforce(alg: FdAlgebra, max_degree: int = 2,
                  budget: int = DEFAULT_BUDGET) -> Tuple[int, int, Dict[int, List[np.ndarray]]]:
    """Cyclic cohomology dimensions HC^n, n <= max_degree, from the (b, B) total
    complex; returns the values at the top even and odd degree together with
    representative cocycles for every degree."""
    d = alg.dim
    if max_degree < 1:
        raise ValueError("max_degree must be at least 1")
    size = sum(d ** (m + 1) for m in range(max_degree + 2)) ** 2
    if size > budget:
        raise BudgetExceeded(f"total complex needs ~{size:.3g} entries (budget {budget})")
    D = [_total_differential(alg, n) for n in range(max_degree + 1)]
    dims: Dict[int, int] = {}
    gens: Dict[int, List[np.ndarray]] = {}
    for n in range(max_degree + 1):
        U, s, Vh = np.linalg.svd(D[n])
        tol = 1e-9 * max(1.0, s[0] if s.size else 1.0)
        r = int((s > tol).sum())
        ker = Vh[r:].conj().T
        if n == 0:
            im = np.zeros((D[0].shape[1], 0), dtype=complex)
        else:
            Ui, si, _ = np.linalg.svd(D[n - 1], full_matrices=False)
            im = Ui[:, si > 1e-9 * max(1.0, si[0] if si.size else 1.0)]
        # complement of the image inside the kernel
        if im.shape[1]:
            proj = ker - im @ (im.conj().T @ ker)
            Uq, sq, _ = np.linalg.svd(proj, full_matrices=False)
            reps = Uq[:, sq > 1e-7]
        else:
            reps = ker
        dims[n] = reps.shape[1]
        gens[n] = [reps[:, i] for i in range(reps.shape[1])]
    top_even = max(m for m in dims if m % 2 == 0)
    top_odd = max(m for m in dims if m % 2 == 1)
    return dims[top_even], dims[top_odd], gens


def hc_dimensions(alg: FdAlgebra, max_degree: int = 2) -> Dict[int, int]:
    _, _, gens = hp_bruteforce(alg, max_degree)
    return {n: len(g) for n, g in gens.items()}


# pairing ------------------------------------------------------------------------

@dataclass
class TorusTrace:
    """Adapter presenting the canonical trace of the torus as a degree-0 functional."""

    K: int = 512

    def __call__(self, x) -> complex:
        from .smoothtorus import trace
        return trace(x)

    def idempotent_defect(self, p) -> float:
        from .smoothtorus import nmul, opnorm_auto
        return opnorm_auto(nmul(p, p) - p, self.K)[0]


def pair_trace_projection(tr, p, tol: float = 1e-6) -> complex:
    """<tr, p> after checking p^2 = p."""
    if isinstance(tr, Cochain):
        if tr.degree != 0:
            raise ShapeMismatch("pairing needs a degree-0 cochain")
        alg = tr.algebra
        p = np.asarray(p, dtype=complex)
        defect = alg.opnorm(alg.mul(p, p) - p)
        if defect > tol:
            raise NotIdempotent(f"||p^2 - p|| = {defect:.3e}")
        return tr(p)
    defect = tr.idempotent_defect(p)
    if defect > tol:
        raise NotIdempotent(f"||p^2 - p|| = {defect:.3e}")
    return tr(p)

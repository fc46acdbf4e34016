"""Smooth noncommutative torus as a twisted Fourier-coefficient algebra.

An element is a finite sum  x = sum c[m, n] u^m v^n  in normal order, with

    (u^m v^n)(u^m' v^n') = exp(-2 pi i theta n m') u^(m+m') v^(n+n').

Coefficients are stored by v-degree: ``rows[n] = (m0, array)`` holds
c[m0 + j, n] in ``array[j]``.  The mapping view ``coeffs`` is derived.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import mpmath
import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.signal import fftconvolve

from . import kernels
from .errors import NotUnitModulus, ThetaMismatch, WindowTooSmall
from .numbertheory import default_precision_bits, mp_str, resolve_theta

PRUNE_FLOOR = 1e-300

Row = Tuple[int, np.ndarray]


@dataclass(frozen=True)
class Theta:
    """θ together with the exact hi/lo double split used for phases."""

    value: mpmath.mpf
    bits: int
    hi: float
    lo: float

    @classmethod
    def make(cls, theta, bits: int | None = None) -> "Theta":
        if isinstance(theta, Theta):
            return theta
        bits = bits or default_precision_bits()
        if isinstance(theta, mpmath.mpf):
            val = theta
        else:
            val = resolve_theta(theta, bits).value
        with mpmath.workprec(bits + 64):
            hi = float(mpmath.floor(val * 2**26)) / 2**26
            lo = float(val - hi)
        return cls(val, bits, hi, lo)

    def __float__(self) -> float:
        return self.hi + self.lo

    def phase(self, k) -> np.ndarray:
        """exp(-2 pi i theta k) for integer k (array-valued)."""
        return kernels.phase(k, self.hi, self.lo)

    def same(self, other: "Theta") -> bool:
        return self.hi == other.hi and self.lo == other.lo


class TorusElement:
    __slots__ = ("theta", "rows")

    def __init__(self, theta, rows: Mapping[int, Row] | None = None, *, bits: int | None = None):
        self.theta = Theta.make(theta, bits)
        self.rows: Dict[int, Row] = {}
        for n, (m0, arr) in (rows or {}).items():
            arr = np.asarray(arr, dtype=np.complex128)
            if arr.size:
                self.rows[int(n)] = (int(m0), arr)
        self._trim(PRUNE_FLOOR)

    # construction ---------------------------------------------------------
    @classmethod
    def zero(cls, theta) -> "TorusElement":
        return cls(theta)

    @classmethod
    def monomial(cls, theta, m: int, n: int, c: complex = 1.0) -> "TorusElement":
        return cls(theta, {n: (m, np.array([c], dtype=complex))})

    @classmethod
    def one(cls, theta) -> "TorusElement":
        return cls.monomial(theta, 0, 0)

    @classmethod
    def from_coeffs(cls, theta, coeffs: Mapping[Tuple[int, int], complex]) -> "TorusElement":
        by_n: Dict[int, Dict[int, complex]] = {}
        for (m, n), c in coeffs.items():
            by_n.setdefault(int(n), {})[int(m)] = complex(c)
        rows = {}
        for n, d in by_n.items():
            lo, hi = min(d), max(d)
            arr = np.zeros(hi - lo + 1, dtype=complex)
            for m, c in d.items():
                arr[m - lo] += c
            rows[n] = (lo, arr)
        return cls(theta, rows)

    @classmethod
    def u_series(cls, theta, m0: int, coeffs) -> "TorusElement":
        """h(u) = sum_j coeffs[j] u^(m0+j)."""
        return cls(theta, {0: (m0, coeffs)})

    @classmethod
    def v_series(cls, theta, n0: int, coeffs) -> "TorusElement":
        """h(v) = sum_j coeffs[j] v^(n0+j)."""
        rows = {n0 + j: (0, np.array([c])) for j, c in enumerate(coeffs) if c != 0}
        return cls(theta, rows)

    def _new(self, rows) -> "TorusElement":
        return TorusElement(self.theta, rows)

    # views ------------------------------------------------------------
    @property
    def coeffs(self) -> Dict[Tuple[int, int], complex]:
        out = {}
        for n, (m0, arr) in self.rows.items():
            for j in np.flatnonzero(arr):
                out[(m0 + int(j), n)] = complex(arr[j])
        return out

    @property
    def precision_bits(self) -> int:
        return self.theta.bits

    def coeff(self, m: int, n: int) -> complex:
        if n not in self.rows:
            return 0j
        m0, arr = self.rows[n]
        j = m - m0
        return complex(arr[j]) if 0 <= j < arr.size else 0j

    def support_size(self) -> int:
        return sum(int(np.count_nonzero(a)) for _, a in self.rows.values())

    def m_range(self) -> Tuple[int, int]:
        if not self.rows:
            return (0, 0)
        return (min(m0 for m0, _ in self.rows.values()),
                max(m0 + a.size - 1 for m0, a in self.rows.values()))

    def n_range(self) -> Tuple[int, int]:
        if not self.rows:
            return (0, 0)
        return (min(self.rows), max(self.rows))

    def is_zero(self) -> bool:
        return not self.rows

    def max_abs(self) -> float:
        return max((float(np.abs(a).max()) for _, a in self.rows.values()), default=0.0)

    def l1(self) -> float:
        return float(sum(np.abs(a).sum() for _, a in self.rows.values()))

    # pruning ----------------------------------------------------------------
    def _trim(self, tol: float) -> None:
        for n in list(self.rows):
            m0, arr = self.rows[n]
            big = np.flatnonzero(np.abs(arr) > tol)
            if big.size == 0:
                del self.rows[n]
                continue
            a, b = big[0], big[-1] + 1
            arr = arr[a:b].copy()
            arr[np.abs(arr) <= tol] = 0
            self.rows[n] = (m0 + int(a), arr)

    def pruned(self, tol: float) -> "TorusElement":
        out = self.copy()
        out._trim(tol)
        return out

    def copy(self) -> "TorusElement":
        return self._new({n: (m0, a.copy()) for n, (m0, a) in self.rows.items()})

    # linear structure -------------------------------------------------------
    def _check(self, other: "TorusElement") -> None:
        if not self.theta.same(other.theta):
            raise ThetaMismatch("elements live over different theta")

    def __add__(self, other):
        if not isinstance(other, TorusElement):
            other = TorusElement.monomial(self.theta, 0, 0, complex(other))
        self._check(other)
        rows = dict(self.rows)
        for n, (m0b, b) in other.rows.items():
            if n not in rows:
                rows[n] = (m0b, b)
                continue
            m0a, a = rows[n]
            lo = min(m0a, m0b)
            hi = max(m0a + a.size, m0b + b.size)
            arr = np.zeros(hi - lo, dtype=complex)
            arr[m0a - lo:m0a - lo + a.size] += a
            arr[m0b - lo:m0b - lo + b.size] += b
            rows[n] = (lo, arr)
        return self._new(rows)

    __radd__ = __add__

    def __neg__(self):
        return self._new({n: (m0, -a) for n, (m0, a) in self.rows.items()})

    def __sub__(self, other):
        if not isinstance(other, TorusElement):
            return self + (-complex(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: complex) -> "TorusElement":
        return self._new({n: (m0, c * a) for n, (m0, a) in self.rows.items()})

    def __mul__(self, other):
        if isinstance(other, TorusElement):
            return nmul(self, other)
        return self.scale(complex(other))

    def __rmul__(self, other):
        return self.scale(complex(other))

    def __repr__(self) -> str:
        return (f"TorusElement(theta={float(self.theta):.12g}, rows={len(self.rows)}, "
                f"support={self.support_size()})")

    # serialisation ----------------------------------------------------------
    def to_json(self) -> dict:
        items = sorted(self.coeffs.items())
        return {
            "theta": mp_str(self.theta.value, self.theta.bits),
            "precision_bits": self.theta.bits,
            "coeffs": [{"m": m, "n": n, "re": repr(c.real), "im": repr(c.imag)}
                       for (m, n), c in items],
        }

    @classmethod
    def from_json(cls, data: dict | str) -> "TorusElement":
        if isinstance(data, str):
            data = json.loads(data)
        bits = int(data["precision_bits"])
        with mpmath.workprec(bits):
            th = Theta.make(mpmath.mpf(data["theta"]), bits)
        coeffs = {(int(c["m"]), int(c["n"])): complex(float(c["re"]), float(c["im"]))
                  for c in data["coeffs"]}
        return cls.from_coeffs(th, coeffs)


# algebra operations ---------------------------------------------------------

PAIRWISE_LIMIT = 64
DENSE_LIMIT = 40_000_000
FFT_NOISE = 1e-17


def nmul(x: TorusElement, y: TorusElement) -> TorusElement:
    """Normal-ordered product."""
    x._check(y)
    if not x.rows or not y.rows:
        return TorusElement(x.theta)
    if len(x.rows) * len(y.rows) > PAIRWISE_LIMIT:
        out = _nmul_dense(x, y)
        if out is not None:
            return out
    return _nmul_pairwise(x, y)


def _nmul_pairwise(x: TorusElement, y: TorusElement) -> TorusElement:
    th = x.theta
    acc: Dict[int, list] = {}
    for n1, (m0a, a) in x.rows.items():
        for n2, (m0b, b) in y.rows.items():
            conv = kernels.twisted_rowconv(a, b, m0b, n1, th.hi, th.lo)
            acc.setdefault(n1 + n2, []).append((m0a + m0b, conv))
    rows = {}
    for n, parts in acc.items():
        lo = min(p[0] for p in parts)
        hi = max(p[0] + p[1].size for p in parts)
        arr = np.zeros(hi - lo, dtype=complex)
        for m0, c in parts:
            arr[m0 - lo:m0 - lo + c.size] += c
        rows[n] = (lo, arr)
    return TorusElement(th, rows)


def _dense(x: TorusElement):
    """Rows of x stacked as columns of an (m, row) array, only occupied rows kept."""
    mlo, mhi = x.m_range()
    ns = np.array(sorted(x.rows), dtype=np.int64)
    D = np.zeros((mhi - mlo + 1, ns.size), dtype=complex)
    for j, n in enumerate(ns):
        m0, a = x.rows[int(n)]
        D[m0 - mlo:m0 - mlo + a.size, j] = a
    return D, mlo, ns


def _nmul_dense(x: TorusElement, y: TorusElement) -> TorusElement | None:
    """Vectorised product over the occupied v-rows.

    Either loop over the rows of x, convolving along m with all rows of y at
    once through the FFT, or, when y has fewer distinct u-powers than x has
    rows, loop over the nonzero entries of y.
    """
    th = x.theta
    X, xm, xns = _dense(x)
    Y, ym, yns = _dense(y)
    out_ns = np.unique(np.add.outer(xns, yns))
    O = np.zeros((X.shape[0] + Y.shape[0] - 1, out_ns.size), dtype=complex)
    if O.size > DENSE_LIMIT:
        return None
    ycols = np.flatnonzero(np.any(Y != 0, axis=1))
    if xns.size <= ycols.size:
        ms = ym + np.arange(Y.shape[0], dtype=np.int64)
        for n1 in xns.tolist():
            m0, a = x.rows[n1]
            C = fftconvolve(a[:, None], Y * th.phase(n1 * ms)[:, None], axes=0)
            i0 = m0 - xm
            O[i0:i0 + C.shape[0], np.searchsorted(out_ns, n1 + yns)] += C
    else:
        # convolve along n on the full row range, keep only the occupied sums
        Xf = np.zeros((X.shape[0], xns[-1] - xns[0] + 1), dtype=complex)
        Xf[:, xns - xns[0]] = X
        Yf = np.zeros((Y.shape[0], yns[-1] - yns[0] + 1), dtype=complex)
        Yf[:, yns - yns[0]] = Y
        xcols = np.flatnonzero(np.any(X != 0, axis=1))
        Xf = Xf[xcols]
        n1s = np.arange(xns[0], xns[-1] + 1, dtype=np.int64)
        keep = out_ns - (xns[0] + yns[0])
        for c in ycols.tolist():
            Xtw = Xf * th.phase(n1s * (ym + c))[None, :]
            C = fftconvolve(Xtw, Yf[c][None, :], axes=1)
            O[np.ix_(xcols + c, np.arange(out_ns.size))] += C[:, keep]
    scale = np.abs(O).max()
    if scale == 0:
        return TorusElement(th)
    O[np.abs(O) <= FFT_NOISE * scale] = 0
    rows = {}
    om = xm + ym
    for j in np.flatnonzero(np.any(O != 0, axis=0)).tolist():
        rows[int(out_ns[j])] = (om, O[:, j])
    return TorusElement(th, rows)


def adjoint(x: TorusElement) -> TorusElement:
    """(c u^m v^n)* = conj(c) exp(-2 pi i theta m n) u^-m v^-n."""
    rows = {}
    for n, (m0, a) in x.rows.items():
        ms = m0 + np.arange(a.size, dtype=np.int64)
        vals = np.conj(a) * x.theta.phase(ms * n)
        rows[-n] = (-(m0 + a.size - 1), vals[::-1].copy())
    return TorusElement(x.theta, rows)


def trace(x: TorusElement) -> complex:
    return x.coeff(0, 0)


def derive(x: TorusElement, k: int = 1, l: int = 0) -> TorusElement:
    """delta_1^k delta_2^l, i.e. c[m, n] -> (i m)^k (i n)^l c[m, n]."""
    rows = {}
    for n, (m0, a) in x.rows.items():
        ms = m0 + np.arange(a.size)
        rows[n] = (m0, a * (1j * ms) ** k * (1j * n) ** l)
    return TorusElement(x.theta, rows)


def act(x: TorusElement, t: complex, s: complex, tol: float = 1e-12) -> TorusElement:
    """alpha_{t,s}: c[m, n] -> t^m s^n c[m, n]."""
    t, s = complex(t), complex(s)
    if abs(abs(t) - 1) > tol or abs(abs(s) - 1) > tol:
        raise NotUnitModulus(f"|t|={abs(t)}, |s|={abs(s)}")
    at, as_ = np.angle(t), np.angle(s)
    rows = {}
    for n, (m0, a) in x.rows.items():
        ms = m0 + np.arange(a.size)
        rows[n] = (m0, a * np.exp(1j * (at * ms + as_ * n)))
    return TorusElement(x.theta, rows)


def act_root(x: TorusElement, p: int, q: int, axis: int) -> TorusElement:
    """alpha with t (axis 0) or s (axis 1) equal to exp(2 pi i p / q), phases reduced mod q."""
    rows = {}
    for n, (m0, a) in x.rows.items():
        if axis == 0:
            ms = m0 + np.arange(a.size)
            rows[n] = (m0, a * np.exp(2j * np.pi * ((p * ms) % q) / q))
        else:
            rows[n] = (m0, a * np.exp(2j * np.pi * ((p * n) % q) / q))
    return TorusElement(x.theta, rows)


def flip(x: TorusElement) -> TorusElement:
    """Automorphism u -> v^-1, v -> u; isometric, swaps the roles of m and n.

    c'[n, -m] = exp(2 pi i theta m n) c[m, n].
    """
    if x.is_zero():
        return x.copy()
    ms, ns, vals = [], [], []
    for n, (m0, a) in x.rows.items():
        m = m0 + np.arange(a.size, dtype=np.int64)
        ms.append(m)
        ns.append(np.full(a.size, n, dtype=np.int64))
        vals.append(np.conj(x.theta.phase(m * n)) * a)
    m, n, val = np.concatenate(ms), np.concatenate(ns), np.concatenate(vals)
    new_n, new_m = -m, n
    rows = {}
    order = np.argsort(new_n, kind="stable")
    new_n, new_m, val = new_n[order], new_m[order], val[order]
    cuts = np.flatnonzero(np.diff(new_n)) + 1
    for sl_n, sl_m, sl_v in zip(np.split(new_n, cuts), np.split(new_m, cuts), np.split(val, cuts)):
        a0, a1 = sl_m.min(), sl_m.max()
        arr = np.zeros(a1 - a0 + 1, dtype=complex)
        arr[sl_m - a0] = sl_v
        rows[int(sl_n[0])] = (int(a0), arr)
    return TorusElement(x.theta, rows)


def power(x: TorusElement, k: int) -> TorusElement:
    out = TorusElement.one(x.theta)
    for _ in range(k):
        out = nmul(out, x)
    return out


# representation and norms ----------------------------------------------------

@dataclass
class MatrixWindow:
    K: int
    matrix: np.ndarray | scipy.sparse.spmatrix
    bandwidth: int

    @property
    def size(self) -> int:
        return 2 * self.K + 1


def bandwidth(x: TorusElement) -> int:
    lo, hi = x.m_range()
    return max(abs(lo), abs(hi))


def matrix_window(x: TorusElement, K: int, sparse: bool | None = None) -> MatrixWindow:
    """Compression of the regular representation to modes |k| <= K (sparse
    banded by default).

    Entry (k + m, k) is sum_n c[m, n] exp(-2 pi i theta n k).
    """
    N = 2 * K + 1
    b = bandwidth(x)
    if sparse is None:
        sparse = True
    ks = np.arange(-K, K + 1, dtype=np.int64)
    ns = sorted(x.rows)
    if not ns:
        mat = scipy.sparse.csc_matrix((N, N), dtype=complex) if sparse else np.zeros((N, N), complex)
        return MatrixWindow(K, mat, 0)
    mlo, mhi = x.m_range()
    C = np.zeros((mhi - mlo + 1, len(ns)), dtype=complex)
    for t, n in enumerate(ns):
        m0, a = x.rows[n]
        C[m0 - mlo:m0 - mlo + a.size, t] = a
    D = kernels.band_diagonals(C, np.array(ns, dtype=np.int64), ks, x.theta.hi, x.theta.lo)
    offsets, diags = [], []
    for i, m in enumerate(range(mlo, mhi + 1)):
        if abs(m) >= N or not np.any(D[i]):
            continue
        # entry (k+m, k) for column k: column index j = k + K, row j + m
        d = D[i, max(0, -m):N - max(0, m)]
        offsets.append(-m)
        diags.append(d)
    if sparse:
        mat = scipy.sparse.diags(diags, offsets, shape=(N, N), format="csc", dtype=complex) \
            if diags else scipy.sparse.csc_matrix((N, N), dtype=complex)
    else:
        mat = np.zeros((N, N), dtype=complex)
        for off, d in zip(offsets, diags):
            m = -off
            j = np.arange(d.size) + max(0, -m)
            mat[j + m, j] = d
    return MatrixWindow(K, mat, b)


SMALL_DENSE = 129
LARGE_WINDOW = 2048


def _top_singular(mat) -> float:
    """Largest singular value; ARPACK with a fixed start vector unless tiny."""
    if mat.shape[1] == 0:
        return 0.0
    if not scipy.sparse.issparse(mat):
        mat = scipy.sparse.csc_matrix(mat)
    if mat.nnz == 0:
        return 0.0
    if min(mat.shape) <= SMALL_DENSE:
        return float(scipy.linalg.svdvals(mat.toarray())[0])
    # Lanczos on A^H A; a Ritz value never exceeds the true top eigenvalue
    A, AH = mat.tocsr(), mat.conj().T.tocsr()
    n = A.shape[1]
    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=lambda z: AH @ (A @ z), dtype=complex)
    v0 = np.ones(n, dtype=complex) / math.sqrt(n)
    # wide windows have a tightly clustered top spectrum; a bigger Krylov space restarts far less
    ncv = min(n, 24 if n <= LARGE_WINDOW else 128)
    try:
        lam = scipy.sparse.linalg.eigsh(op, k=1, which="LA", v0=v0, tol=1e-13,
                                        ncv=ncv, maxiter=5000,
                                        return_eigenvectors=False)[0]
    except scipy.sparse.linalg.ArpackNoConvergence:
        return float(scipy.linalg.svdvals(mat.toarray())[0])
    return float(math.sqrt(max(lam.real, 0.0)))


def opnorm(x: TorusElement, K: int, orient: str = "auto") -> Tuple[float, int]:
    """Lower bound for the operator norm from a central-column window.

    ``orient`` chooses between x and its flip; "auto" takes the smaller
    bandwidth.  Returns (estimate, bandwidth used).
    """
    if x.is_zero():
        return 0.0, 0
    y = x
    if orient == "flip" or (orient == "auto" and _nbandwidth(x) < bandwidth(x)):
        y = flip(x)
    b = bandwidth(y)
    if K < 4 * b:
        raise WindowTooSmall(f"K={K} < 4*bandwidth={4 * b}")
    w = matrix_window(y, K)
    cols = slice(b, w.size - b)
    mat = w.matrix[:, cols]
    return _top_singular(mat), b


def opnorm_auto(x: TorusElement, K: int) -> Tuple[float, int]:
    """opnorm with the window widened to 4 x bandwidth when needed; returns (norm, K used)."""
    if x.is_zero():
        return 0.0, K
    b = min(bandwidth(x), _nbandwidth(x))
    K = max(K, 4 * b)
    return opnorm(x, K)[0], K


def _nbandwidth(x: TorusElement) -> int:
    lo, hi = x.n_range()
    return max(abs(lo), abs(hi))


def norm_upper(x: TorusElement) -> float:
    """Certified upper bound: sum of coefficient magnitudes."""
    return x.l1()


def norm_lower(x: TorusElement) -> float:
    """Certified lower bound: the trace 2-norm sqrt(tau(x* x))."""
    return float(math.sqrt(sum(float(np.vdot(a, a).real) for _, a in x.rows.values())))


def norm_estimate(x: TorusElement, K: int) -> Tuple[float, str]:
    """Window estimate when the window is wide enough, else the 2-norm bound."""
    if x.is_zero():
        return 0.0, "zero"
    if 4 * min(bandwidth(x), _nbandwidth(x)) <= K:
        return opnorm(x, K)[0], "window"
    return norm_lower(x), "l2-lower"


def seminorm(x: TorusElement, k: int, l: int, K: int) -> float:
    return opnorm(derive(x, k, l), K)[0]


def residual_norm(x: TorusElement, K: int, tol: float | None = None) -> Tuple[float, str]:
    """Norm of a residual: the l1 upper bound when it already meets ``tol``
    (or when the element is zero), otherwise the window estimate."""
    up = norm_upper(x)
    if up == 0.0 or (tol is not None and up < tol):
        return up, "l1-upper"
    try:
        return opnorm(x, K)[0], "window"
    except WindowTooSmall:
        return up, "l1-upper"


def delta_pow_coeffs(k: int) -> np.ndarray:
    """a[nu] for nu = 0..k with delta_1^k(h(u)) = sum_nu a[nu] h^(nu)(u) u^nu.

    Recurrence a_{nu,k+1} = i (a_{nu-1,k} + nu a_{nu,k}), a_{1,1} = i.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    a = np.zeros(k + 1, dtype=complex)
    a[1] = 1j
    for kk in range(1, k):
        nxt = np.zeros(k + 1, dtype=complex)
        for nu in range(1, kk + 2):
            nxt[nu] = 1j * (a[nu - 1] + nu * a[nu])
        a = nxt
    return a


def laurent_derivative(m0: int, coeffs: np.ndarray, order: int) -> Tuple[int, np.ndarray]:
    """Coefficients of h^(order)(z) u^order for h(z) = sum c_j z^(m0+j).

    Multiplying by u^order keeps the result a Laurent polynomial with the same
    exponents: z^m -> m(m-1)...(m-order+1) z^m.
    """
    ms = m0 + np.arange(coeffs.size)
    fall = np.ones(coeffs.size, dtype=complex)
    for r in range(order):
        fall = fall * (ms - r)
    return m0, coeffs * fall

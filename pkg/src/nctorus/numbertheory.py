"""Continued fractions of theta and the SL(2, Z) data of the approximating tower.

All integer work is exact.  Real quantities (theta, beta, beta') are mpmath
floats at a configurable binary precision; the partial quotients themselves are
certified with a directed-rounding enclosure of theta, so a quotient is only
emitted when both ends of the enclosure agree on its floor.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Sequence, Tuple

import mpmath
from mpmath import mpf

from .errors import (
    AssignmentFailure,
    InsufficientQuotients,
    PrecisionExhausted,
    RationalInput,
)

DEFAULT_PRECISION_BITS = 256

# theta = (sqrt(D) - s) / 2**e for the named constants
NAMED_THETAS = {
    "golden": (5, 1, 1),
    "silver": (2, 1, 0),
}


def default_precision_bits() -> int:
    env = os.environ.get("NCT_PRECISION_BITS")
    if env:
        bits = int(env)
        if bits < 53:
            raise ValueError("NCT_PRECISION_BITS must be at least 53")
        return bits
    return DEFAULT_PRECISION_BITS


def decimal_digits(bits: int) -> int:
    """Number of decimal digits that faithfully represent a `bits`-bit float."""
    return int(math.ceil(bits * math.log10(2))) + 2


def mp_str(x, bits: int) -> str:
    with mpmath.workprec(bits):
        return mpmath.nstr(mpf(x), decimal_digits(bits), strip_zeros=False,
                           min_fixed=-math.inf, max_fixed=math.inf)


@dataclass(frozen=True)
class ThetaEnclosure:
    """Point value of theta together with a certified enclosure [lo, hi]."""

    value: mpf
    lo: mpf
    hi: mpf
    bits: int
    rational: Fraction | None = None  # set for decimal / Fraction input

    @property
    def digits(self) -> str:
        return mp_str(self.value, self.bits)


def resolve_theta(theta, bits: int | None = None) -> ThetaEnclosure:
    """Turn a named constant, decimal string, Fraction or mpf into an enclosure."""
    bits = bits or default_precision_bits()
    with mpmath.workprec(bits + 16):
        if isinstance(theta, ThetaEnclosure):
            return theta
        if isinstance(theta, str) and theta.strip().lower() in NAMED_THETAS:
            d, s, e = NAMED_THETAS[theta.strip().lower()]
            k = bits + 8
            root = math.isqrt(d << (2 * k))
            lo = mpmath.fdiv(root - (s << k), 1 << (k + e), prec=bits, rounding="f")
            hi = mpmath.fdiv(root + 1 - (s << k), 1 << (k + e), prec=bits, rounding="c")
            val = mpmath.fdiv(2 * root + 1 - (s << (k + 1)), 1 << (k + e + 1), prec=bits)
            return ThetaEnclosure(val, lo, hi, bits)
        if isinstance(theta, (str, Fraction, int)):
            fr = Fraction(theta.strip()) if isinstance(theta, str) else Fraction(theta)
            lo = mpmath.fdiv(fr.numerator, fr.denominator, prec=bits, rounding="f")
            hi = mpmath.fdiv(fr.numerator, fr.denominator, prec=bits, rounding="c")
            val = mpmath.fdiv(fr.numerator, fr.denominator, prec=bits)
            return ThetaEnclosure(val, lo, hi, bits, rational=fr)
        if isinstance(theta, float):
            x = mpf(theta)
            return ThetaEnclosure(x, x, x, bits, rational=Fraction(theta))
        x = mpf(theta)
        ulp = mpmath.ldexp(1, -bits) * max(1, abs(x))
        return ThetaEnclosure(+x, x - ulp, x + ulp, bits)


@dataclass(frozen=True)
class QuotientList:
    a: Tuple[int, ...]
    theta_digits: str
    precision_bits: int
    theta: mpf = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.a)

    def convergents(self) -> List[Tuple[int, int]]:
        """Pairs (p_k, q_k) for k = 0 .. len(a); index 0 is 0/1."""
        out = [(0, 1)]
        p_prev, q_prev = 1, 0
        p, q = 0, 1
        for ak in self.a:
            p, p_prev = ak * p + p_prev, p
            q, q_prev = ak * q + q_prev, q
            out.append((p, q))
        return out


def cf_expand(theta, count: int, precision_bits: int | None = None) -> QuotientList:
    """First `count` partial quotients a_1, a_2, ... of theta in (0, 1)."""
    enc = resolve_theta(theta, precision_bits)
    bits = enc.bits
    if not (0 < enc.lo and enc.hi < 1):
        raise ValueError("theta must lie in (0, 1)")
    quotients: List[int] = []
    if enc.rational is not None:
        # exact input: the expansion is exact and terminates
        x = enc.rational
        for _ in range(count):
            if x == 0:
                raise RationalInput(f"expansion terminates after {len(quotients)} quotients")
            y = 1 / x
            ak = math.floor(y)
            quotients.append(ak)
            x = y - ak
        return QuotientList(tuple(quotients), enc.digits, bits, enc.value)
    lo, hi = enc.lo, enc.hi
    for _ in range(count):
        if lo <= 0:
            raise PrecisionExhausted(f"remainder not bounded away from 0 after {len(quotients)} quotients")
        ylo = mpmath.fdiv(1, hi, prec=bits, rounding="f")
        yhi = mpmath.fdiv(1, lo, prec=bits, rounding="c")
        ak = int(mpmath.floor(ylo))
        if ak != int(mpmath.floor(yhi)):
            raise PrecisionExhausted(f"cannot certify quotient {len(quotients) + 1} at {bits} bits")
        quotients.append(ak)
        lo = mpmath.fsub(ylo, ak, prec=bits, rounding="f")
        hi = mpmath.fsub(yhi, ak, prec=bits, rounding="c")
    return QuotientList(tuple(quotients), enc.digits, bits, enc.value)


def _a_matrix(a: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    return ((a, 1), (1, 0))


def _matmul(x, y):
    return (
        (x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]),
        (x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]),
    )


def _det(x) -> int:
    return x[0][0] * x[1][1] - x[0][1] * x[1][0]


def p_matrix(a: Sequence[int], n: int):
    """P_n = A(a_{4n}) A(a_{4n-1}) A(a_{4n-2}) A(a_{4n-3}) with 1-based quotients."""
    if n < 1:
        raise ValueError("level index starts at 1")
    if len(a) < 4 * n:
        raise InsufficientQuotients(f"P_{n} needs {4 * n} quotients, have {len(a)}")
    out = ((1, 0), (0, 1))
    for idx in (4 * n, 4 * n - 1, 4 * n - 2, 4 * n - 3):
        out = _matmul(out, _a_matrix(a[idx - 1]))
    return out


@dataclass(frozen=True)
class LevelData:
    n: int
    P: Tuple[Tuple[int, int], Tuple[int, int]]
    q_even: int
    q_odd: int
    p_even: int
    p_odd: int
    lower: Tuple[int, int]  # (p, q) with p/q < theta
    upper: Tuple[int, int]  # (p', q') with p'/q' > theta
    beta: mpf
    beta_prime: mpf
    trans: Tuple[int, int, int, int]
    theta: mpf = field(repr=False)
    precision_bits: int = DEFAULT_PRECISION_BITS

    # short names used throughout the construction code
    @property
    def p(self) -> int:
        return self.lower[0]

    @property
    def q(self) -> int:
        return self.lower[1]

    @property
    def pp(self) -> int:
        return self.upper[0]

    @property
    def qp(self) -> int:
        return self.upper[1]

    def to_json(self) -> dict:
        bits = self.precision_bits
        s = str
        return {
            "n": s(self.n),
            "P": [[s(v) for v in row] for row in self.P],
            "q_even": s(self.q_even),
            "q_odd": s(self.q_odd),
            "p_even": s(self.p_even),
            "p_odd": s(self.p_odd),
            "lower": [s(v) for v in self.lower],
            "upper": [s(v) for v in self.upper],
            "beta": mp_str(self.beta, bits),
            "beta_prime": mp_str(self.beta_prime, bits),
            "trans": [s(v) for v in self.trans],
            "theta": mp_str(self.theta, bits),
            "precision_bits": s(bits),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LevelData":
        bits = int(obj["precision_bits"])
        with mpmath.workprec(bits):
            return cls(
                n=int(obj["n"]),
                P=tuple(tuple(int(v) for v in row) for row in obj["P"]),
                q_even=int(obj["q_even"]),
                q_odd=int(obj["q_odd"]),
                p_even=int(obj["p_even"]),
                p_odd=int(obj["p_odd"]),
                lower=tuple(int(v) for v in obj["lower"]),
                upper=tuple(int(v) for v in obj["upper"]),
                beta=mpf(obj["beta"]),
                beta_prime=mpf(obj["beta_prime"]),
                trans=tuple(int(v) for v in obj["trans"]),
                theta=mpf(obj["theta"]),
                precision_bits=bits,
            )


def pair_data(theta, lower: Tuple[int, int], upper: Tuple[int, int],
              precision_bits: int | None = None, n: int = 0) -> LevelData:
    """SL(2, Z) data for an arbitrary pair p/q < theta < p'/q' (not tied to a level).

    The tower fields (P, trans) are filled with the identity; `n = 0` marks the
    record as free-standing.
    """
    enc = resolve_theta(theta, precision_bits)
    bits = enc.bits
    p, q = lower
    pp, qp = upper
    if pp * q - p * qp != 1:
        raise AssignmentFailure(f"det(p' p; q' q) = {pp * q - p * qp}, expected 1")
    with mpmath.workprec(bits):
        if not (mpf(p) / q < enc.lo and enc.hi < mpf(pp) / qp):
            raise AssignmentFailure("pair does not bracket theta")
    beta, beta_prime = _betas(enc.value, p, q, pp, qp, bits)
    ident = ((1, 0), (0, 1))
    return LevelData(n, ident, q, qp, p, pp, (p, q), (pp, qp), beta, beta_prime,
                     (1, 0, 0, 1), enc.value, bits)


def _betas(theta, p, q, pp, qp, bits):
    # q * theta is formed exactly before rounding back to the working precision
    guard = 2 * max(q, qp).bit_length() + 16
    with mpmath.workprec(bits + guard):
        beta = mpf(pp) - qp * theta
        beta_prime = q * theta - p
    with mpmath.workprec(bits):
        return +beta, +beta_prime


def level_data(ql: QuotientList, n: int) -> LevelData:
    """Level n of the tower: P_n, (q_{2n}, q_{2n-1}) and the bracketing pair."""
    if len(ql.a) < 4 * n + 4:
        raise InsufficientQuotients(f"level {n} needs {4 * n + 4} quotients, have {len(ql.a)}")
    Pn = p_matrix(ql.a, n)
    col = (1, 0)
    for k in range(1, n + 1):
        Pk = p_matrix(ql.a, k)
        col = (Pk[0][0] * col[0] + Pk[0][1] * col[1], Pk[1][0] * col[0] + Pk[1][1] * col[1])
    q_even, q_odd = col
    conv = ql.convergents()
    pe, qe = conv[4 * n]
    po, qo = conv[4 * n - 1]
    if (qe, qo) != (q_even, q_odd):
        raise AssignmentFailure("matrix tower disagrees with convergent recursion")
    Pn1 = p_matrix(ql.a, n + 1)
    trans = (Pn1[0][0], Pn1[0][1], Pn1[1][0], Pn1[1][1])
    bits = ql.precision_bits
    theta = ql.theta
    for lower, upper in (((pe, qe), (po, qo)), ((po, qo), (pe, qe))):
        p, q = lower
        pp, qp = upper
        if pp * q - p * qp != 1:
            continue
        with mpmath.workprec(bits):
            if not (mpf(p) / q < theta < mpf(pp) / qp):
                continue
        beta, beta_prime = _betas(theta, p, q, pp, qp, bits)
        return LevelData(n, Pn, q_even, q_odd, pe, po, lower, upper, beta, beta_prime,
                         trans, theta, bits)
    raise AssignmentFailure(f"no ordering of {pe}/{qe}, {po}/{qo} satisfies det=1 and bracketing")


def tower(ql: QuotientList, depth: int) -> List[LevelData]:
    levels = [level_data(ql, n) for n in range(1, depth + 1)]
    for prev, nxt in zip(levels, levels[1:]):
        a, b, c, d = prev.trans
        assert nxt.q_even == a * prev.q_even + b * prev.q_odd
        assert nxt.q_odd == c * prev.q_even + d * prev.q_odd
    return levels


def check_level(level: LevelData) -> List[str]:
    """Names of violated LevelData invariants (empty when all hold)."""
    bad = []
    p, q = level.lower
    pp, qp = level.upper
    bits = level.precision_bits
    if pp * q - p * qp != 1:
        bad.append("det")
    with mpmath.workprec(bits):
        th = level.theta
        if not (mpf(p) / q < th < mpf(pp) / qp):
            bad.append("bracket")
        tol = mpmath.ldexp(1, -(bits - 8))
        if abs(q * level.beta + qp * level.beta_prime - 1) >= tol:
            bad.append("unimodular_sum")
        if not (0 < level.beta < mpf(1) / q):
            bad.append("beta_range")
        if not (0 < level.beta_prime < mpf(1) / qp):
            bad.append("beta_prime_range")
    if {q, qp} != {level.q_even, level.q_odd}:
        bad.append("q_sets")
    if level.n >= 1 and _det(level.P) != 1:
        bad.append("det_P")
    return bad


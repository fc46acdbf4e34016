"""Bump pairs (f, g) on the circle [0, 1) and their Fourier coefficients.

Three constructions are offered:

* ``paper-literal``: the exponential ramps e^(-alpha/x) glued exactly as
  originally written down (in the narrow case they do not vanish at the left
  support edge, so certification fails there).
* ``corrected``: the same exponential ramps, with the narrow case profile
  shifted to vanish at its left edge and the down-ramp defined as 1 - f(x - beta).
  Identities hold exactly; junctions are only C^1.
* ``smooth``: a C^infinity ramp built from psi(s) = phi(s) / (phi(s) + phi(1-s)),
  phi(s) = e^(-a/s); f = sin^2(pi psi / 2) on the up-ramp and g = sin(pi psi) / 2.

All variants satisfy, for x in supp g,
    f(x) + f(x - beta) = 1,   g(x)^2 = f(x) - f(x)^2,   g(x) g(x - beta) = 0.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Tuple

import mpmath
import numpy as np
from scipy.special import roots_legendre

from .errors import CaseMismatch, QuadratureStall
from .numbertheory import LevelData

MODES = ("paper-literal", "corrected", "smooth")
DEFAULT_PROFILE_A = 1.5
LOG_SQRT2 = 0.5 * math.log(2.0)


# elementary profiles; ``lib`` is numpy or mpmath so the same code serves
# grid evaluation and high-precision junction differentiation

def _expo(y, alpha, lib):
    """e^(-alpha/y) for y > 0, continuously extended by 0."""
    if lib is np:
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-alpha / y[pos])
        return out
    return lib.exp(-alpha / y) if y > 0 else lib.mpf(0)


def _psi(s, a, lib):
    """C^infinity step from 0 (s <= 0) to 1 (s >= 1)."""
    if lib is np:
        s = np.asarray(s, dtype=float)
        out = np.where(s >= 1, 1.0, 0.0)
        mid = (s > 0) & (s < 1)
        sm = s[mid]
        # ratio form avoids underflow in both tails; overflow to inf gives 0
        with np.errstate(over="ignore"):
            out[mid] = 1.0 / (1.0 + np.exp(-a / (1 - sm) + a / sm))
        return out
    if s <= 0:
        return lib.mpf(0)
    if s >= 1:
        return lib.mpf(1)
    return 1 / (1 + lib.exp(-a / (1 - s) + a / s))


@dataclass(frozen=True)
class Piece:
    a: float
    b: float
    name: str
    f: Callable  # f(x, lib)
    h: Callable  # 1 - f(x, lib), computed without cancellation


@dataclass(frozen=True)
class BumpPair:
    case: str  # "wide" | "narrow"
    mode: str
    q: int
    beta: float
    alpha: float
    breakpoints: Tuple[float, ...]
    g_support: Tuple[float, float]
    profile_a: float = DEFAULT_PROFILE_A
    pieces: Tuple[Piece, ...] = field(default=(), compare=False, hash=False, repr=False)

    # evaluation ------------------------------------------------------------
    def _eval(self, x, which: str) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        out = np.zeros_like(x) if which != "h" else np.ones_like(x)
        for p in self.pieces:
            sel = (x >= p.a) & (x < p.b)
            if np.any(sel):
                out[sel] = (p.f if which == "f" else p.h)(x[sel], np)
        return out

    def f(self, x) -> np.ndarray:
        return self._eval(x, "f")

    def one_minus_f(self, x) -> np.ndarray:
        return self._eval(x, "h")

    def g(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        lo, hi = self.g_support
        out = np.zeros_like(x)
        sel = (x >= lo) & (x < hi)
        if not np.any(sel):
            return out
        xs = x[sel]
        if self.mode == "smooth":
            out[sel] = 0.5 * np.sin(np.pi * _psi((xs - lo) / (hi - lo), self.profile_a, np))
        else:
            fv, hv = self.f(xs), self.one_minus_f(xs)
            out[sel] = np.sqrt(np.clip(fv * hv, 0.0, None))
        return out

    def g_mp(self, x):
        lo, hi = self.g_support
        if not (lo <= x < hi):
            return mpmath.mpf(0)
        if self.mode == "smooth":
            return mpmath.sin(mpmath.pi * _psi((x - lo) / (hi - lo), self.profile_a, mpmath)) / 2
        p = self.piece_at(x)
        return mpmath.sqrt(max(p.f(x, mpmath) * p.h(x, mpmath), 0))

    def piece_at(self, x) -> Piece:
        for p in self.pieces:
            if p.a <= x < p.b:
                return p
        return self.pieces[-1]

    @property
    def key(self) -> tuple:
        return (self.case, self.mode, self.q, self.beta, self.profile_a)

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "mode": self.mode,
            "q": str(self.q),
            "beta": repr(self.beta),
            "alpha": repr(self.alpha),
            "profile_a": repr(self.profile_a),
            "breakpoints": [repr(b) for b in self.breakpoints],
            "g_support": [repr(b) for b in self.g_support],
            "pieces": [{"a": repr(p.a), "b": repr(p.b), "name": p.name} for p in self.pieces],
        }


# construction ------------------------------------------------------------------

def _zero(x, lib):
    return np.zeros_like(x) if lib is np else lib.mpf(0)


def _one(x, lib):
    return np.ones_like(x) if lib is np else lib.mpf(1)


def _wide_pieces(q: int, beta: float, mode: str, a_s: float) -> Tuple[List[Piece], float]:
    L = 1.0 / q - beta
    top = 1.0 / q
    pieces: List[Piece] = []
    if mode == "smooth":
        alpha = a_s

        def up(x, lib):
            return lib.sin(lib.pi / 2 * _psi(x / L, a_s, lib)) ** 2

        def up_c(x, lib):
            return lib.cos(lib.pi / 2 * _psi(x / L, a_s, lib)) ** 2

        pieces += [Piece(0.0, L, "up", up, up_c)]
        pieces += [Piece(L, beta, "plateau", _one, _zero)]
        pieces += [Piece(beta, top, "down", lambda x, lib: up_c(x - beta, lib),
                         lambda x, lib: up(x - beta, lib))]
    else:
        alpha = L * LOG_SQRT2

        def f1(y, lib):
            return _expo(y, alpha, lib)

        pieces += [
            Piece(0.0, L / 2, "f1", lambda x, lib: f1(x, lib), lambda x, lib: 1 - f1(x, lib)),
            Piece(L / 2, L, "f2", lambda x, lib: 1 - f1(L - x, lib), lambda x, lib: f1(L - x, lib)),
            Piece(L, beta, "plateau", _one, _zero),
            # f3(x) = f2(1/q - x) = 1 - f1(x - beta)
            Piece(beta, beta + L / 2, "f3", lambda x, lib: 1 - f1(x - beta, lib),
                  lambda x, lib: f1(x - beta, lib)),
            Piece(beta + L / 2, top, "f4", lambda x, lib: f1(top - x, lib),
                  lambda x, lib: 1 - f1(top - x, lib)),
        ]
    pieces.append(Piece(top, 1.0, "zero", _zero, _one))
    return pieces, alpha


def _narrow_pieces(q: int, beta: float, mode: str, a_s: float) -> Tuple[List[Piece], float]:
    half = 0.5 / q
    s = half - beta
    end = half + beta
    pieces: List[Piece] = [Piece(0.0, s, "zero", _zero, _one)] if s > 0 else []
    if mode == "smooth":
        alpha = a_s

        def up(x, lib):
            return lib.sin(lib.pi / 2 * _psi((x - s) / beta, a_s, lib)) ** 2

        def up_c(x, lib):
            return lib.cos(lib.pi / 2 * _psi((x - s) / beta, a_s, lib)) ** 2

        pieces += [Piece(s, half, "up", up, up_c),
                   Piece(half, end, "down", lambda x, lib: up_c(x - beta, lib),
                         lambda x, lib: up(x - beta, lib))]
    elif mode == "corrected":
        alpha = beta * LOG_SQRT2

        # ramp on [s, 1/2q] with value 1/2 at its midpoint, vanishing at s
        pieces += [
            Piece(s, s + beta / 2, "r1", lambda x, lib: _expo(x - s, alpha, lib),
                  lambda x, lib: 1 - _expo(x - s, alpha, lib)),
            Piece(s + beta / 2, half, "r2", lambda x, lib: 1 - _expo(half - x, alpha, lib),
                  lambda x, lib: _expo(half - x, alpha, lib)),
            # down-ramp: 1 - f(x - beta)
            Piece(half, half + beta / 2, "d1", lambda x, lib: 1 - _expo(x - half, alpha, lib),
                  lambda x, lib: _expo(x - half, alpha, lib)),
            Piece(half + beta / 2, end, "d2", lambda x, lib: _expo(end - x, alpha, lib),
                  lambda x, lib: 1 - _expo(end - x, alpha, lib)),
        ]
    else:
        alpha = beta * LOG_SQRT2

        def f1(y, lib):
            return _expo(y, alpha, lib)

        top = 1.0 / q

        def f2(y, lib):
            return 1 - f1(top - beta - y, lib)

        pieces += [
            Piece(s, s + beta / 2, "f1", f1, lambda x, lib: 1 - f1(x, lib)),
            Piece(s + beta / 2, half, "f2", f2, lambda x, lib: 1 - f2(x, lib)),
            Piece(half, half + beta / 2, "f3", lambda x, lib: f2(beta - x, lib),
                  lambda x, lib: 1 - f2(beta - x, lib)),
            Piece(half + beta / 2, end, "f4", lambda x, lib: f1(beta - x, lib),
                  lambda x, lib: 1 - f1(beta - x, lib)),
        ]
    pieces.append(Piece(end, 1.0, "zero", _zero, _one))
    return pieces, alpha


def make_bump(q: int, beta: float, mode: str = "corrected",
              profile_a: float = DEFAULT_PROFILE_A) -> BumpPair:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    q, beta = int(q), float(beta)
    if not (q >= 1 and 0 < beta < 1.0 / q):
        raise CaseMismatch(f"need 0 < beta < 1/q, got q={q}, beta={beta}")
    if beta >= 0.5 / q:
        case = "wide"
        pieces, alpha = _wide_pieces(q, beta, mode, profile_a)
        gsup = (beta, 1.0 / q)
    else:
        case = "narrow"
        pieces, alpha = _narrow_pieces(q, beta, mode, profile_a)
        gsup = (0.5 / q, 0.5 / q + beta)
    for p in pieces:
        if p.b < p.a:
            raise CaseMismatch(f"inverted interval for piece {p.name}: [{p.a}, {p.b}]")
    # at beta = 1/2q the wide plateau shrinks to a point
    pieces = [p for p in pieces if p.b > p.a]
    bps = tuple(sorted({p.a for p in pieces} | {p.b for p in pieces} - {1.0}))
    return BumpPair(case, mode, q, beta, alpha, bps, gsup, profile_a, tuple(pieces))


def build_bump(level: LevelData, role: str = "principal", mode: str = "corrected",
               profile_a: float = DEFAULT_PROFILE_A) -> BumpPair:
    """Bump pair for e_beta (principal: q, beta) or e_beta' (dual: q', beta')."""
    if role == "principal":
        return make_bump(level.q, float(level.beta), mode, profile_a)
    if role == "dual":
        return make_bump(level.qp, float(level.beta_prime), mode, profile_a)
    raise ValueError(f"role must be 'principal' or 'dual', got {role!r}")


# quadrature --------------------------------------------------------------------

GL_NODES = 32
MAX_DOUBLINGS = 12
QUAD_TOL = 1e-14


@lru_cache(maxsize=8)
def _gl(n: int):
    x, w = roots_legendre(n)
    return x, w


def _piece_nodes(a: float, b: float, nsub: int):
    xg, wg = _gl(GL_NODES)
    edges = np.linspace(a, b, nsub + 1)
    half = (edges[1:] - edges[:-1])[:, None] / 2
    mid = (edges[1:] + edges[:-1])[:, None] / 2
    return (mid + half * xg).ravel(), (half * wg).ravel()


def _quad_coeffs(b: BumpPair, fn: Callable, M: int, nsub: int) -> np.ndarray:
    ms = np.arange(-M, M + 1)
    out = np.zeros(2 * M + 1, dtype=complex)
    for p in b.pieces:
        if p.name == "zero":
            continue
        x, w = _piece_nodes(p.a, p.b, nsub)
        vals = fn(x) * w
        # chunk the exponential table to bound memory
        step = max(1, 4_000_000 // max(1, ms.size))
        for i in range(0, x.size, step):
            out += vals[i:i + step] @ np.exp(-2j * np.pi * np.outer(x[i:i + step], ms))
    return out


def quad_integral(b: BumpPair, fn: Callable, nsub: int = 8) -> float:
    total = 0.0
    for p in b.pieces:
        x, w = _piece_nodes(p.a, p.b, nsub)
        total += float(np.dot(fn(x), w))
    return total


@lru_cache(maxsize=64)
def _fourier_cached(b: BumpPair, M: int) -> Tuple[np.ndarray, np.ndarray, int]:
    nsub = 2
    prev = None
    for _ in range(MAX_DOUBLINGS + 1):
        fh = _quad_coeffs(b, b.f, M, nsub)
        gh = _quad_coeffs(b, b.g, M, nsub)
        if prev is not None:
            diff = max(np.abs(fh - prev[0]).max(), np.abs(gh - prev[1]).max())
            if diff < QUAD_TOL:
                return fh, gh, nsub
        prev = (fh, gh)
        nsub *= 2
    raise QuadratureStall(f"Fourier coefficients did not settle after {MAX_DOUBLINGS} doublings")


def fourier(b: BumpPair, M: int) -> Tuple[np.ndarray, np.ndarray]:
    """(f_hat, g_hat) indexed m = -M..M."""
    if M < 1:
        raise ValueError("M must be >= 1")
    fh, gh, _ = _fourier_cached(b, int(M))
    return fh.copy(), gh.copy()


def trig_eval(coeffs: np.ndarray, x) -> np.ndarray:
    M = (coeffs.size - 1) // 2
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for i in range(0, x.size, 2048):
        xs = x.ravel()[i:i + 2048]
        out.ravel()[i:i + 2048] = np.exp(2j * np.pi * np.outer(xs, np.arange(-M, M + 1))) @ coeffs
    return out


# certification -----------------------------------------------------------------

JUNCTION_ORDER_MAX = 4


def _grid(b: BumpPair, n: int) -> np.ndarray:
    x = (np.arange(n) + 0.5) / n
    bp = np.array(list(b.breakpoints) + [1.0] + [bb + b.beta for bb in b.breakpoints])
    d = np.abs(np.mod(x[:, None] - bp[None, :] + 0.5, 1.0) - 0.5).min(axis=1)
    return x[d > 1e-9]


def junction_orders(b: BumpPair, max_order: int = JUNCTION_ORDER_MAX, dps: int = 40) -> List[dict]:
    """Highest k <= max_order such that derivatives 0..k of f agree across a junction."""
    out = []
    pieces = list(b.pieces)
    with mpmath.workdps(dps):
        for i, left in enumerate(pieces):
            right = pieces[(i + 1) % len(pieces)]
            c = left.b if left.b < 1.0 else 1.0
            cr = right.a  # equals c (mod 1)
            jumps = []
            for k in range(max_order + 1):
                dl = mpmath.diff(lambda t: left.f(t, mpmath), mpmath.mpf(c), k, direction=-1,
                                 h=mpmath.mpf(10) ** (-dps // 4 + 1))
                dr = mpmath.diff(lambda t: right.f(t, mpmath), mpmath.mpf(cr), k, direction=1,
                                 h=mpmath.mpf(10) ** (-dps // 4 + 1))
                jumps.append(float(abs(dl - dr)))
            order = -1
            for k, jmp in enumerate(jumps):
                scale = 1e-6 * max(1.0, b.q ** k)
                if jmp > scale:
                    break
                order = k
            out.append({"at": float(c) % 1.0, "left": left.name, "right": right.name,
                        "order": order, "jumps": jumps})
    return out


def certify(b: BumpPair, grid_points: int = 10_000) -> dict:
    """Violations of the five pair identities plus junction smoothness."""
    if grid_points < 1000:
        raise ValueError("grid_points must be at least 1000")
    x = _grid(b, grid_points)
    f = b.f(x)
    h = b.one_minus_f(x)
    g = b.g(x)
    lo, hi = b.g_support
    ins = (x >= lo) & (x < hi)
    fb = b.f(x - b.beta)
    viol = {
        "f_range": float(max(0.0, -f.min(), (f - 1).max())),
        "g_square": float(max(np.abs(g[ins] ** 2 - f[ins] * h[ins]).max(initial=0.0),
                              np.abs(g[~ins]).max(initial=0.0))),
        "partition": float(np.abs(f[ins] + fb[ins] - 1).max(initial=0.0)),
        "disjoint": float(np.abs(g * b.g(x - b.beta)).max()),
        "integral": float(abs(quad_integral(b, b.f, 16) - b.beta)),
    }
    junctions = junction_orders(b)
    return {
        "bump": b.to_json(),
        "grid_points": int(x.size),
        "violations": viol,
        "max_violation": max(viol.values()),
        "junctions": junctions,
        "smoothness_order": min(j["order"] for j in junctions),
    }


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "value"])
    for k, v in report["violations"].items():
        w.writerow([k, repr(v)])
    w.writerow(["smoothness_order", report["smoothness_order"]])
    return buf.getvalue()


def samples_csv(b: BumpPair, n: int = 1000) -> str:
    x = np.arange(n) / n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "f", "g"])
    for xi, fi, gi in zip(x, b.f(x), b.g(x)):
        w.writerow([repr(float(xi)), repr(float(fi)), repr(float(gi))])
    return buf.getvalue()


def dumps(obj: Dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)

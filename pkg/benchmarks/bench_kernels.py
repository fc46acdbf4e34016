"""Compiled core vs numpy fallback on the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Kernel timings call both modules directly. The end-to-end product timing runs
a subprocess per backend with NCT_PURE_PYTHON toggled, so the dispatch layer
is exercised as users see it.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nctorus import _kernels_py
from nctorus.smoothtorus import Theta

try:
    from nctorus import _kernels
except ImportError:  # extension not built
    _kernels = None

TH = Theta.make("golden")

E2E = """
import os, timeit
from nctorus.numbertheory import cf_expand, level_data
from nctorus.projections import rieffel_projection
from nctorus.smoothtorus import nmul
from nctorus import kernels
e = rieffel_projection(level_data(cf_expand("golden", 12), 1), "principal", {M})
t = min(timeit.repeat(lambda: nmul(e, e), number=1, repeat={R}))
print(kernels.BACKEND, t)
"""


def cases(rng):
    k = rng.integers(-10**7, 10**7, 200_000)
    a = rng.normal(size=120) + 1j * rng.normal(size=120)
    b = rng.normal(size=150) + 1j * rng.normal(size=150)
    C = rng.normal(size=(64, 41)) + 1j * rng.normal(size=(64, 41))
    ns = np.arange(-20, 21)
    ks = np.arange(-1024, 1025)
    return {
        "phase (2e5 ints)": lambda m: m.phase(k, TH.hi, TH.lo),
        "twisted_rowconv (120x150)": lambda m: m.twisted_rowconv(a, b, -40, 3, TH.hi, TH.lo),
        "band_diagonals (64x41x2049)": lambda m: m.band_diagonals(C, ns, ks, TH.hi, TH.lo),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--modes", type=int, default=128, help="Fourier cutoff for the product timing")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:32s} {tp:12.3f} {'n/a':>12s} {'':>8s}")
            continue
        tc = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {tp:12.3f} {tc:12.3f} {tp / tc:8.1f}")

    code = E2E.format(M=args.modes, R=args.repeat)
    times = {}
    for flag in ("1", "0"):
        env = dict(os.environ, NCT_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        times[out[0]] = float(out[1]) * 1e3
    for backend, t in sorted(times.items()):
        print(f"{'nmul(e, e) M=' + str(args.modes) + ' [' + backend + ']':32s} {t:12.3f} ms")


if __name__ == "__main__":
    main()

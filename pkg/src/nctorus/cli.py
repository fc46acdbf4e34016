"""Command-line experiment driver.

Every subcommand writes JSON artifacts (numbers as decimal strings) that embed
the run configuration and the library version.  Exit codes: 0 when all checks
pass, 1 on a tolerance failure, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import mpmath
import numpy as np

from . import __version__

MACHINE_EPS = float(np.finfo(float).eps)

TOLERANCES: Dict[str, float] = {
    "cf.unimodular": 1e-12,
    "bump.identity": 1e-10,
    "proj.idempotent": 1e-6,
    "proj.selfadjoint": 1e-12,
    "proj.trace": 1e-10,
    "proj.orthogonality": 1e-6,
    "proj.trace_gap": 1e-10,
    "approx.commutation": 1e-5,
    "embed.homomorphism": 1e-12,
    "embed.pullback": 1e-9,
    "cohom.bicomplex": 1e-13,
    "cohom.pairing": 1e-10,
}


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    theta: str = "golden"
    depth: int = 2
    level: int = 1
    M: Tuple[int, ...] = (256,)
    K: int = 512
    precision_bits: int = 256
    seed: int = 0
    samples: int = 20
    mode: str = "smooth"
    role: str = "principal"
    out: str = "."
    tolerances: Dict[str, float] = dataclasses.field(default_factory=dict)

    def validate(self) -> None:
        for name in ("depth", "level", "K", "precision_bits", "samples"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        if self.seed < 0:
            raise UsageError("seed must be non-negative")
        if not self.M or any(m <= 0 for m in self.M):
            raise UsageError("modes must be positive")
        from .numbertheory import resolve_theta
        try:
            resolve_theta(self.theta, self.precision_bits)
        except ValueError as exc:
            raise UsageError(f"bad theta {self.theta!r}: {exc}") from exc
        for k, v in self.tolerances.items():
            if k not in TOLERANCES:
                raise UsageError(f"unknown tolerance {k!r}")
            if not v >= MACHINE_EPS:
                raise UsageError(f"tolerance {k} below machine epsilon")

    def tol(self, name: str) -> float:
        return self.tolerances.get(name, TOLERANCES[name])

    def modes_for(self, level: int) -> int:
        return self.M[min(level, len(self.M)) - 1]

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["M"] = list(self.M)
        d["tolerances"] = {k: self.tol(k) for k in sorted(TOLERANCES)}
        return serialize(d)


# serialization ------------------------------------------------------------------

def serialize(obj):
    """Recursively turn numbers into decimal strings."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return repr(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": repr(float(obj.real)), "im": repr(float(obj.imag))}
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, mpmath.mpf):
        return mpmath.nstr(obj, 40)
    if isinstance(obj, dict):
        return {str(k): serialize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [serialize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return serialize(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


class Checks:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.rows: List[dict] = []

    def add(self, name: str, value: float, tol_name: str) -> None:
        tol = self.cfg.tol(tol_name)
        ok = bool(value < tol)
        self.rows.append({"check": name, "value": value, "tolerance": tol, "passed": ok})

    def require(self, name: str, ok: bool) -> None:
        self.rows.append({"check": name, "passed": bool(ok)})

    @property
    def failed(self) -> List[str]:
        return [r["check"] for r in self.rows if not r["passed"]]


def _write(cfg: RunConfig, name: str, results: dict, checks: Checks,
           extra: Dict[str, str] | None = None) -> List[str]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": name, "version": __version__, "config": cfg.to_json(),
           "results": serialize(results), "checks": serialize(checks.rows),
           "passed": not checks.failed}
    (out / f"{name}.json").write_text(dumps(doc))
    for fname, text in (extra or {}).items():
        (out / fname).write_text(text)
    return checks.failed


# subcommands ---------------------------------------------------------------------

def _levels(cfg: RunConfig, depth: int):
    from .numbertheory import cf_expand, tower
    ql = cf_expand(cfg.theta, 4 * depth + 4, cfg.precision_bits)
    return tower(ql, depth)


def cmd_cf(cfg: RunConfig) -> List[str]:
    from .numbertheory import check_level
    levels = _levels(cfg, cfg.depth)
    checks = Checks(cfg)
    qs = []
    for lv in levels:
        bad = check_level(lv)
        checks.require(f"level{lv.n}.invariants", not bad)
        with mpmath.workprec(lv.precision_bits):
            gap = float(abs(lv.q * lv.beta + lv.qp * lv.beta_prime - 1))
        checks.add(f"level{lv.n}.unimodular", gap, "cf.unimodular")
        qs += [lv.q_odd, lv.q_even]
    results = {"q": qs, "levels": [lv.to_json() for lv in levels]}
    return _write(cfg, "cf", results, checks)


def cmd_bump(cfg: RunConfig) -> List[str]:
    from . import bumps
    lv = _levels(cfg, cfg.level)[-1]
    b = bumps.build_bump(lv, cfg.role, cfg.mode)
    rep = bumps.certify(b)
    checks = Checks(cfg)
    for k, v in rep["violations"].items():
        checks.add(k, v, "bump.identity")
    extra = {"bump_report.csv": bumps.report_csv(rep), "bump_samples.csv": bumps.samples_csv(b)}
    return _write(cfg, "bump", rep, checks, extra)


def cmd_proj(cfg: RunConfig) -> List[str]:
    from .projections import build_bundle
    lv = _levels(cfg, cfg.level)[-1]
    bundle = build_bundle(lv, cfg.modes_for(cfg.level), cfg.mode)
    rep = bundle.report(cfg.K)
    checks = Checks(cfg)
    for name in ("e_beta", "e_beta_prime"):
        checks.add(f"{name}.idempotent", rep[name]["idempotent"], "proj.idempotent")
        checks.add(f"{name}.selfadjoint", rep[name]["selfadjoint_coeff"], "proj.selfadjoint")
        checks.add(f"{name}.trace", rep[name]["trace_error"], "proj.trace")
    checks.add("orthogonality_principal", rep["orthogonality_principal"]["max_offdiag"],
               "proj.orthogonality")
    checks.add("orthogonality_dual", rep["orthogonality_dual"]["max_offdiag"], "proj.orthogonality")
    checks.add("trace_gap", rep["trace_gap"], "proj.trace_gap")
    return _write(cfg, "proj", rep, checks)


def cmd_approx(cfg: RunConfig) -> List[str]:
    from .projections import approx_generators, convergence_report, table_csv
    levels = _levels(cfg, max(cfg.depth, cfg.level))
    lv = levels[cfg.level - 1]
    _, _, rep = approx_generators(lv, cfg.modes_for(cfg.level), cfg.mode, cfg.K)
    conv = convergence_report(levels[:cfg.depth], K=cfg.K,
                              M=[cfg.modes_for(n) for n in range(1, cfg.depth + 1)], mode=cfg.mode)
    checks = Checks(cfg)
    checks.add("commutation_1", rep["commutation_1"], "approx.commutation")
    checks.add("commutation_2", rep["commutation_2"], "approx.commutation")
    if "certified_decreasing_u" in conv:
        checks.require("convergence.decreasing_u", conv["certified_decreasing_u"])
    results = {"approximants": rep, "convergence": conv}
    return _write(cfg, "approx", results, checks, {"approx_convergence.csv": table_csv(conv)})


def cmd_embed(cfg: RunConfig) -> List[str]:
    from .atalgebra import Embedding, homomorphism_residuals, odd_pullback, trace_pullback
    levels = _levels(cfg, cfg.level + 1)
    lv = levels[cfg.level - 1]
    e = Embedding.from_level(lv)
    hom = homomorphism_residuals(e, cfg.samples, cfg.seed)
    tp = trace_pullback(e, seed=cfg.seed)
    op = odd_pullback(e, seed=cfg.seed)
    checks = Checks(cfg)
    for k in ("unitality", "multiplicativity", "star"):
        checks.add(k, hom[k], "embed.homomorphism")
    checks.require("block_sizes", not e.check(levels[cfg.level]))
    checks.add("trace_pullback_vs_trans", float(np.abs(tp.matrix - e.matrix()).max()), "embed.pullback")
    R = tp.integer_matrix()
    checks.require("trace_pullback_det_one", R is not None and round(np.linalg.det(R)) == 1)
    results = {"homomorphism": hom, "trans": e.matrix(), "trace_pullback": tp.to_json(),
               "odd_pullback": op.to_json()}
    return _write(cfg, "embed", results, checks)


def _bicomplex_residuals(alg, rng, samples: int, max_degree: int = 3) -> dict:
    from .cyclic import Cochain, connes_B, hochschild_b
    worst = {"bb": 0.0, "BB": 0.0, "bB+Bb": 0.0}
    for n in range(max_degree + 1):
        for _ in range(samples):
            phi = Cochain.random(alg, n, rng)
            worst["bb"] = max(worst["bb"], hochschild_b(hochschild_b(phi)).max_abs())
            if n >= 2:
                worst["BB"] = max(worst["BB"], connes_B(connes_B(phi)).max_abs())
            if n >= 1:
                r = connes_B(hochschild_b(phi)) + hochschild_b(connes_B(phi))
                worst["bB+Bb"] = max(worst["bB+Bb"], r.max_abs())
    return worst


def cmd_cohom(cfg: RunConfig) -> List[str]:
    from .cyclic import (TorusTrace, direct_sum, hp_bruteforce, matrix_algebra,
                         pair_trace_projection, point, trace_cochain)
    from .projections import rieffel_projection
    rng = np.random.default_rng(cfg.seed)
    checks = Checks(cfg)
    algs = {"M2": matrix_algebra(2), "C+C": direct_sum(point(), point()), "C": point()}
    bic = {}
    for name in ("M2", "C+C"):
        bic[name] = _bicomplex_residuals(algs[name], rng, cfg.samples)
        for k, v in bic[name].items():
            checks.add(f"{name}.{k}", v, "cohom.bicomplex")
    hp = {}
    for name, alg in algs.items():
        ev, od, _ = hp_bruteforce(alg, 2)
        hp[name] = {"even": ev, "odd": od}
    checks.require("hp.M2", (hp["M2"]["even"], hp["M2"]["odd"]) == (1, 0))
    checks.require("hp.C+C", (hp["C+C"]["even"], hp["C+C"]["odd"]) == (2, 0))
    A = algs["M2"]
    tr = trace_cochain(A)
    lv = _levels(cfg, cfg.level)[-1]
    e = rieffel_projection(lv, "principal", cfg.modes_for(cfg.level), cfg.mode)
    tau_e = pair_trace_projection(TorusTrace(cfg.K), e, tol=1e-6)
    pairings = {"Tr(1)": pair_trace_projection(tr, A.unit), "Tr(E11)": pair_trace_projection(tr, A.basis(0)),
                "tau(e_beta)": tau_e, "beta": float(lv.beta)}
    checks.add("Tr(1)", abs(pairings["Tr(1)"] - 2), "cohom.pairing")
    checks.add("Tr(E11)", abs(pairings["Tr(E11)"] - 1), "cohom.pairing")
    checks.add("tau(e_beta)", abs(tau_e - float(lv.beta)), "cohom.pairing")
    results = {"bicomplex": bic, "hp": hp, "pairings": pairings}
    return _write(cfg, "cohom", results, checks)


def cmd_report(cfg: RunConfig) -> List[str]:
    out = Path(cfg.out)
    summary, failed = {}, []
    for path in sorted(out.glob("*.json")):
        if path.name == "summary.json":
            continue
        doc = json.loads(path.read_text())
        bad = [r["check"] for r in doc.get("checks", []) if not r["passed"]]
        summary[doc.get("command", path.stem)] = {"passed": not bad, "failed": bad,
                                                  "config": doc.get("config")}
        failed += [f"{path.stem}.{b}" for b in bad]
    checks = Checks(cfg)
    for name in failed:
        checks.require(name, False)
    return _write(cfg, "summary", {"artifacts": summary}, checks)


COMMANDS = {"cf": cmd_cf, "bump": cmd_bump, "proj": cmd_proj, "approx": cmd_approx,
            "embed": cmd_embed, "cohom": cmd_cohom, "report": cmd_report}


# argument handling ------------------------------------------------------------------

def _parse_modes(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError as exc:
        raise UsageError(f"bad modes {text!r}") from exc


def _parse_tol(items: Sequence[str]) -> Dict[str, float]:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"tolerance override {item!r} is not name=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise UsageError(f"bad tolerance value {v!r}") from exc
    return out


def read_config_file(path: str) -> Dict[str, str]:
    """key=value lines; '#' starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


_FIELD_ALIASES = {"modes": "M", "window": "K", "precision": "precision_bits"}


def _apply(cfg: RunConfig, key: str, value) -> None:
    key = _FIELD_ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
    if key.startswith("tol."):
        cfg.tolerances.update(_parse_tol([f"{key[4:]}={value}"]))
        return
    if key == "M":
        cfg.M = _parse_modes(value)
        return
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    if key not in fields or key == "tolerances":
        raise UsageError(f"unknown config key {key!r}")
    cur = getattr(cfg, key)
    try:
        setattr(cfg, key, int(value) if isinstance(cur, int) else str(value))
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nctorus", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key=value file; flags override it")
        s.add_argument("--theta")
        s.add_argument("--depth", type=int)
        s.add_argument("--level", type=int)
        s.add_argument("--modes", help="Fourier truncation M, or a comma list per level")
        s.add_argument("--window", type=int, help="norm window K")
        s.add_argument("--precision-bits", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--samples", type=int)
        s.add_argument("--mode", choices=("paper-literal", "corrected", "smooth"))
        s.add_argument("--role", choices=("principal", "dual"))
        s.add_argument("--out")
        s.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    env = os.environ.get("NCT_PRECISION_BITS")
    if env:
        _apply(cfg, "precision_bits", env)
    if args.config:
        for k, v in read_config_file(args.config).items():
            _apply(cfg, k, v)
    for key in ("theta", "depth", "level", "modes", "window", "precision_bits", "seed",
                "samples", "mode", "role", "out"):
        val = getattr(args, key)
        if val is not None:
            _apply(cfg, key, val)
    cfg.tolerances.update(_parse_tol(args.tol))
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    from .errors import NCTorusError
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = config_from_args(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        failed = COMMANDS[args.command](cfg)
    except NCTorusError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if failed:
        print(f"{args.command}: failed checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

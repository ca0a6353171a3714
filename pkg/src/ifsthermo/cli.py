"""Command line front end: ``ifsthermo <subcommand> --config cfg.json --out DIR``.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 invalid input,
3 numerical failure (unstable spectral radius or no positive eigenfunction).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import holonomic as hol
from . import sim, thermo
from .expr import ExprError, ExprSyntaxError, parse, validate_map_range
from .grid import DEFAULT_N, check_n, write_csv
from .transfer import (
    MAX_ITER,
    SPECTRAL_TOL,
    SpectralError,
    WeightedSystem,
    check_markov,
    normalize_system,
    spectral_triple,
)

SUBCOMMANDS = ("spectrum", "normalize", "pressure", "entropy", "verify", "simulate", "holonomy",
               "beta-sweep")
DEFAULT_TESTS = ("x", "x^2", "cos(2*pi*x)")
DEFAULT_BETAS = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0)
LIFTED_KINDS = ("lifted", "lifted_uniform")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"config field '{path}': {message}")


class NumericalFailure(RuntimeError):
    pass


@dataclass
class Config:
    maps: list
    weight_mode: str
    u: list | None = None
    phi: str | None = None
    grid_n: int = DEFAULT_N
    tol: float = SPECTRAL_TOL
    max_iter: int = MAX_ITER
    seed: int = 0
    candidates: list = field(default_factory=list)
    psi: str | None = None
    betas: list = field(default_factory=lambda: list(DEFAULT_BETAS))
    cylinder: list = field(default_factory=lambda: [0])
    tests: list = field(default_factory=lambda: list(DEFAULT_TESTS))
    simulate: dict = field(default_factory=dict)

    def system(self) -> WeightedSystem:
        if self.weight_mode == "per_map":
            return WeightedSystem.per_map(self.maps, self.u)
        return WeightedSystem.with_phi(self.maps, self.phi)


# --- config ----------------------------------------------------------------


def _expr(value, path: str):
    if not isinstance(value, str):
        raise ConfigError(path, "expected an expression string")
    try:
        return parse(value)
    except ExprSyntaxError as exc:
        raise ConfigError(path, f"{exc} (offset {exc.offset})") from None


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _real(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _candidate(c, path: str, d: int):
    if isinstance(c, str):
        if c not in LIFTED_KINDS:
            raise ConfigError(path, f"unknown candidate {c!r}; use an orbit spec or one of {LIFTED_KINDS}")
        return c
    if not isinstance(c, dict):
        raise ConfigError(path, "expected an orbit spec object or a string")
    unknown = set(c) - {"x0", "preperiod", "period", "n"}
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    if "period" not in c:
        raise ConfigError(f"{path}.period", "missing")
    out = {}
    for key in ("preperiod", "period"):
        if key in c:
            s = c[key]
            if not isinstance(s, str) or not all(ch.isdigit() for ch in s):
                raise ConfigError(f"{path}.{key}", "expected a string of digits")
            if any(int(ch) >= d for ch in s):
                raise ConfigError(f"{path}.{key}", f"digit out of range for {d} maps")
            out[key] = s
    if not out["period"]:
        raise ConfigError(f"{path}.period", "must be nonempty")
    if "x0" in c and c["x0"] is not None:
        x0 = _real(c["x0"], f"{path}.x0")
        if not 0.0 <= x0 <= 1.0:
            raise ConfigError(f"{path}.x0", "must lie in [0, 1]")
        out["x0"] = x0
    if "n" in c:
        out["n"] = _int(c["n"], f"{path}.n")
        if out["n"] < 1:
            raise ConfigError(f"{path}.n", "must be >= 1")
    return out


def config_from_dict(raw: Any) -> Config:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a JSON object")
    known = set(Config.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    if "maps" not in raw:
        raise ConfigError("maps", "missing")
    maps = raw["maps"]
    if not isinstance(maps, list) or not maps:
        raise ConfigError("maps", "expected a nonempty list of expressions")
    for i, m in enumerate(maps):
        ast = _expr(m, f"maps[{i}]")
        try:
            rep = validate_map_range(ast)
        except ExprError as exc:
            raise ConfigError(f"maps[{i}]", str(exc)) from None
        if not rep.ok:
            j, x, val = rep.violations[0]
            raise ConfigError(f"maps[{i}]", f"leaves [0, 1]: value {val!r} at x={x!r}")
    d = len(maps)
    mode = raw.get("weight_mode")
    if mode not in ("per_map", "weight_function"):
        raise ConfigError("weight_mode", "expected 'per_map' or 'weight_function'")
    kw: dict = {"maps": list(maps), "weight_mode": mode}
    if mode == "per_map":
        u = raw.get("u")
        if not isinstance(u, list) or len(u) != d:
            raise ConfigError("u", f"expected a list of {d} weight expressions")
        for i, w in enumerate(u):
            _expr(w, f"u[{i}]")
        kw["u"] = list(u)
    else:
        if "phi" not in raw:
            raise ConfigError("phi", "missing")
        _expr(raw["phi"], "phi")
        kw["phi"] = raw["phi"]
    if "grid_n" in raw:
        try:
            kw["grid_n"] = check_n(_int(raw["grid_n"], "grid_n"))
        except ValueError as exc:
            raise ConfigError("grid_n", str(exc)) from None
    if "tol" in raw:
        kw["tol"] = _real(raw["tol"], "tol")
        if kw["tol"] <= 0:
            raise ConfigError("tol", "must be positive")
    if "max_iter" in raw:
        kw["max_iter"] = _int(raw["max_iter"], "max_iter")
        if kw["max_iter"] < 1:
            raise ConfigError("max_iter", "must be >= 1")
    if "seed" in raw:
        kw["seed"] = _int(raw["seed"], "seed")
        if not 0 <= kw["seed"] < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if "candidates" in raw:
        if not isinstance(raw["candidates"], list):
            raise ConfigError("candidates", "expected a list")
        kw["candidates"] = [_candidate(c, f"candidates[{i}]", d) for i, c in enumerate(raw["candidates"])]
    if raw.get("psi") is not None:
        _expr(raw["psi"], "psi")
        kw["psi"] = raw["psi"]
    if "betas" in raw:
        if not isinstance(raw["betas"], list):
            raise ConfigError("betas", "expected a list")
        kw["betas"] = [_real(b, f"betas[{i}]") for i, b in enumerate(raw["betas"])]
        if any(b < 0 for b in kw["betas"]):
            raise ConfigError("betas", "must be nonnegative")
    if "cylinder" in raw:
        cyl = raw["cylinder"]
        if not isinstance(cyl, list):
            raise ConfigError("cylinder", "expected a list of digits")
        for i, c in enumerate(cyl):
            if not 0 <= _int(c, f"cylinder[{i}]") < d:
                raise ConfigError(f"cylinder[{i}]", "digit out of range")
        kw["cylinder"] = list(cyl)
    if "tests" in raw:
        if not isinstance(raw["tests"], list) or not raw["tests"]:
            raise ConfigError("tests", "expected a nonempty list of expressions")
        for i, t in enumerate(raw["tests"]):
            _expr(t, f"tests[{i}]")
        kw["tests"] = list(raw["tests"])
    if "simulate" in raw:
        s = raw["simulate"]
        if not isinstance(s, dict):
            raise ConfigError("simulate", "expected an object")
        allowed = {"x0": _real, "steps": _int, "bins": _int, "burn_in": _int, "thin": _int}
        for key, val in s.items():
            if key not in allowed:
                raise ConfigError(f"simulate.{key}", "unknown key")
            allowed[key](val, f"simulate.{key}")
        kw["simulate"] = dict(s)
    cfg = Config(**kw)
    try:
        cfg.system()
    except ValueError as exc:
        raise ConfigError("<system>", str(exc)) from None
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"{path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return config_from_dict(raw)


def apply_flags(cfg: Config, args: argparse.Namespace) -> Config:
    if args.grid_n is not None:
        try:
            cfg.grid_n = check_n(args.grid_n)
        except ValueError as exc:
            raise ConfigError("--grid-n", str(exc)) from None
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError("--tol", "must be positive")
        cfg.tol = args.tol
    if args.seed is not None:
        cfg.seed = args.seed
    if args.beta is not None:
        try:
            betas = [float(b) for b in args.beta.split(",") if b.strip()]
        except ValueError:
            raise ConfigError("--beta", f"expected comma separated numbers, got {args.beta!r}") from None
        if not betas or any(not b >= 0 for b in betas):
            raise ConfigError("--beta", "need nonnegative values")
        cfg.betas = betas
    return cfg


# --- output ----------------------------------------------------------------


def _dump(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _dump(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".15g") if math.isfinite(v) else "null"
    return json.dumps(str(obj))


def to_json_text(obj) -> str:
    """JSON with sorted keys and 15 significant digits, stable byte for byte."""
    return _dump(obj) + "\n"


def _write_report(out: Path, name: str, report: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.json"
    path.write_text(to_json_text(report))
    return path


# --- shared pieces ---------------------------------------------------------


@dataclass
class Context:
    cfg: Config
    out: Path
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.sys = self.cfg.system()
        self._triple = None
        self._normal = None

    @property
    def n(self) -> int:
        return self.cfg.grid_n

    def triple(self):
        if self._triple is None:
            with warnings.catch_warnings(record=True):
                warnings.simplefilter("always")
                self._triple = spectral_triple(self.sys, self.n, self.cfg.tol, self.cfg.max_iter)
            if not self._triple.rho_stable:
                raise NumericalFailure("spectral radius did not stabilize: " + "; ".join(self._triple.warnings))
        return self._triple

    def normalized(self):
        if self._normal is None:
            with warnings.catch_warnings(record=True):
                warnings.simplefilter("always")
                try:
                    self._normal = normalize_system(self.sys, self.triple())
                except SpectralError as exc:
                    raise NumericalFailure(str(exc)) from None
        return self._normal

    def candidates(self, default=("lifted_uniform",)):
        specs = self.cfg.candidates or list(default)
        out = []
        for k, spec in enumerate(specs):
            out.append((_candidate_label(spec), self._build(spec, f"candidates[{k}]")))
        return out

    def _build(self, spec, path):
        if spec == "lifted":
            v, mu = self.normalized()
            return hol.lift(v, mu)
        if spec == "lifted_uniform":
            d = self.sys.d
            uniform = WeightedSystem.per_map(self.sys.maps, [repr(1.0 / d)] * d)
            with warnings.catch_warnings(record=True):
                warnings.simplefilter("always")
                return hol.lift(uniform, n=self.n, max_iter=self.cfg.max_iter)
        try:
            return hol.orbit_from_spec(self.sys, spec)
        except (hol.HolonomicError, ValueError) as exc:
            raise ConfigError(path, str(exc)) from None


def _candidate_label(spec) -> str:
    if isinstance(spec, str):
        return spec
    w = hol.Word.parse(spec["period"], spec.get("preperiod", ""))
    x0 = spec.get("x0")
    return f"orbit {w}" + ("" if x0 is None else f" x0={x0!r}")


def _entropy_pair(m, psi):
    return thermo.entropy_inf(m, psi), thermo.entropy_alt(m)


def _spectral_pressure(ctx: Context):
    if ctx.sys.weight_mode != "weight_function":
        return None
    try:
        return thermo.pressure_spectral(ctx.sys, ctx.n, ctx.cfg.tol, ctx.cfg.max_iter, triple=ctx.triple())
    except thermo.ThermoError as exc:
        raise ConfigError("phi", str(exc)) from None


# --- subcommands -----------------------------------------------------------


def cmd_spectrum(ctx: Context) -> dict:
    t = ctx.triple()
    x = t.h.x
    write_csv(ctx.out / "spectrum_h.csv", ("x", "h"), zip(x, t.h.values))
    write_csv(ctx.out / "spectrum_nu.csv", ("x", "nu"), zip(x, t.nu.weights))
    return {"system": ctx.sys.describe(), "grid_n": ctx.n, "tol": ctx.cfg.tol, **t.summary()}


def cmd_normalize(ctx: Context) -> dict:
    v, mu = ctx.normalized()
    disc = v.discretize(ctx.n)
    header = ("x",) + tuple(f"v{i}" for i in range(v.d))
    write_csv(ctx.out / "normalize_weights.csv", header, zip(mu.x, *disc.branch))
    write_csv(ctx.out / "normalize_mu.csv", ("x", "mu"), zip(mu.x, mu.weights))
    lifted = hol.LiftedMeasure(v, mu)
    return {
        "system": ctx.sys.describe(),
        "grid_n": ctx.n,
        "rho": ctx.triple().rho,
        "markov_defect": check_markov(v, ctx.n),
        "stationarity_defect": hol.stationarity_defect(lifted),
        "min_weight": float(disc.branch.min()),
    }


def cmd_pressure(ctx: Context) -> dict:
    spectral = _spectral_pressure(ctx)
    cands = ctx.candidates()
    measures = [m for _, m in cands]
    phi = ctx.sys.phi if ctx.sys.weight_mode == "weight_function" else None
    report: dict = {"system": ctx.sys.describe(), "grid_n": ctx.n,
                    "candidates": [label for label, _ in cands]}
    report["spectral"] = None if spectral is None else spectral.to_json()
    if phi is None:
        report["variational"] = None
        report["variational_alt"] = None
        ctx.notes.append("variational pressure needs a weight function phi")
    else:
        psi = ctx.cfg.psi
        inf = thermo.pressure_variational(phi, measures, "inf", psi)
        alt = thermo.pressure_variational(phi, measures, "alt")
        report["variational"] = inf.to_json()
        report["variational_alt"] = alt.to_json()
        report["argmax_label"] = cands[inf.argmax][0]
    return report


def cmd_entropy(ctx: Context) -> dict:
    rows = []
    for label, m in ctx.candidates():
        inf, alt = _entropy_pair(m, ctx.cfg.psi)
        rows.append({"candidate": label, "inf_formula": inf.to_json(), "alt_formula": alt.to_json()})
    return {"system": ctx.sys.describe(), "grid_n": ctx.n, "d": ctx.sys.d, "ln_d": math.log(ctx.sys.d),
            "entropies": rows}


def _holonomy_rows(ctx: Context):
    rows = []
    tests = [parse(t) for t in ctx.cfg.tests]
    cyl = tuple(ctx.cfg.cylinder)
    for label, m in ctx.candidates():
        rows.append({
            "candidate": label,
            "measure": m.to_json(),
            "holonomy_defect": hol.holonomy_defect(m, tests),
            "sigma_invariance_defect": hol.sigma_invariance_defect(m, None, cyl),
            "marginal_pushforward_defect": hol.marginal_pushforward_defect(m),
            "holonomic_inequality_defect": min(hol.holonomic_inequality_defect(m, f)
                                               for f in ("1", "1 + x", "2 + cos(2*pi*x)")),
        })
    return rows


def cmd_holonomy(ctx: Context) -> dict:
    return {"system": ctx.sys.describe(), "grid_n": ctx.n, "cylinder": list(ctx.cfg.cylinder),
            "tests": list(ctx.cfg.tests), "candidates": _holonomy_rows(ctx)}


def cmd_verify(ctx: Context) -> dict:
    checks = []

    def check(name, value, ok, bound):
        checks.append({"name": name, "value": value, "bound": bound, "passed": bool(ok)})

    t = ctx.triple()
    check("spectral radius stable", t.rho, t.rho_stable, ctx.cfg.tol)
    if not t.converged:
        ctx.notes.append(f"power iteration residuals h={t.residual_h:.3g}, nu={t.residual_nu:.3g}")
    for row in _holonomy_rows(ctx):
        bound = 1e-12 if row["measure"]["kind"] == "orbit" else 1e-8
        check(f"holonomy defect [{row['candidate']}]", row["holonomy_defect"],
              row["holonomy_defect"] <= bound, bound)
        check(f"holonomic inequality [{row['candidate']}]", row["holonomic_inequality_defect"],
              row["holonomic_inequality_defect"] >= -1e-10, -1e-10)
    normal = None
    try:
        normal = ctx.normalized()
    except NumericalFailure as exc:
        ctx.notes.append(f"normalization skipped: {exc}")
    if normal is not None:
        v, mu = normal
        lifted = hol.lift(v, mu)
        dis = hol.disintegrate(lifted)
        used = dis.marginal > 0
        gap = float(np.max(np.abs(dis.weights[:, used] - v.discretize(ctx.n).branch[:, used])))
        check("disintegration round-trip", gap, gap <= 1e-8, 1e-8)
        check("normalized Markov defect", check_markov(v, ctx.n), check_markov(v, ctx.n) <= 1e-8, 1e-8)
    spectral = _spectral_pressure(ctx)
    if spectral is not None:
        phi = ctx.sys.phi
        for label, m in ctx.candidates():
            for method, bound in (("inf", 1e-6), ("alt", 1e-3)):
                rep = thermo.equilibrium_check(m, phi, spectral.value, method, psi=ctx.cfg.psi)
                # every holonomic measure sits below the pressure
                check(f"h_{method} + int ln phi <= p [{label}]", rep.value - spectral.value,
                      rep.value <= spectral.value + bound, bound)
                if label == "lifted" and method == "alt":
                    check(f"lifted equilibrium attains p [{label}]", rep.defect, rep.defect <= 1e-3, 1e-3)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {_dump(c['value'])}")
    return {"system": ctx.sys.describe(), "grid_n": ctx.n, "checks": checks,
            "passed": all(c["passed"] for c in checks)}


def cmd_simulate(ctx: Context) -> dict:
    opts = ctx.cfg.simulate
    steps = int(opts.get("steps", 100_000))
    bins = int(opts.get("bins", 256))
    x0 = float(opts.get("x0", 0.5))
    thin = int(opts.get("thin", max(1, steps // 10_000)))
    burn_in = opts.get("burn_in")
    if steps < 1:
        raise ConfigError("simulate.steps", "must be >= 1")
    if bins < 1 or ctx.n % bins:
        raise ConfigError("simulate.bins", f"must divide grid_n={ctx.n}")
    if not 0 <= x0 <= 1:
        raise ConfigError("simulate.x0", "must lie in [0, 1]")
    if burn_in is not None and not 0 <= burn_in < steps:
        raise ConfigError("simulate.burn_in", "must lie in [0, steps)")
    system = ctx.sys
    normalized = False
    if check_markov(system, ctx.n) > 1e-8:
        system, _ = ctx.normalized()
        normalized = True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ref = hol.lift(system, n=ctx.n, max_iter=ctx.cfg.max_iter).base
        traj = sim.chaos_game(system, x0, steps, ctx.cfg.seed, ctx.n)
    emp = sim.empirical_measure(traj, bins, ref)
    ref_hist = sim.bin_grid_measure(ref, bins)
    traj.to_csv(ctx.out / "simulate_trajectory.csv", thin)
    write_csv(ctx.out / "simulate_histogram.csv", ("left", "right", "empirical", "reference"),
              zip(emp.histogram.edges[:-1], emp.histogram.edges[1:], emp.histogram.masses, ref_hist.masses))
    table = []
    for f in ctx.cfg.tests:
        avg = sim.birkhoff_average(traj, f, burn_in)
        oracle = hol.integrate_holonomic(hol.LiftedMeasure(system, ref), f)
        table.append({"f": f, "birkhoff": avg, "stationary": oracle, "difference": avg - oracle})
    write_csv(ctx.out / "simulate_birkhoff.csv", ("f", "birkhoff", "stationary", "difference"),
              ((r["f"], r["birkhoff"], r["stationary"], r["difference"]) for r in table))
    return {
        "system": ctx.sys.describe(), "grid_n": ctx.n, "seed": ctx.cfg.seed, "x0": x0, "steps": steps,
        "bins": bins, "normalized_first": normalized, "l1_to_stationary": emp.l1, "birkhoff": table,
        "warnings": sorted({str(w.message) for w in caught}),
    }


def cmd_beta_sweep(ctx: Context) -> dict:
    if ctx.sys.weight_mode != "weight_function":
        raise ConfigError("weight_mode", "beta-sweep needs a weight function phi")
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        try:
            rows = thermo.beta_sweep(ctx.sys.maps, ctx.sys.phi, ctx.cfg.betas, ctx.n, ctx.cfg.tol,
                                     ctx.cfg.max_iter)
        except SpectralError as exc:
            raise NumericalFailure(str(exc)) from None
    thermo.sweep_to_csv(rows, ctx.out / "beta_sweep.csv")
    p = np.array([r.pressure for r in rows])
    b = np.array([r.beta for r in rows])
    second = []
    for k in range(1, len(rows) - 1):
        # second divided difference on a possibly uneven grid
        left = (p[k] - p[k - 1]) / (b[k] - b[k - 1])
        right = (p[k + 1] - p[k]) / (b[k + 1] - b[k])
        second.append((right - left) / (b[k + 1] - b[k - 1]) * 2.0)
    return {
        "system": ctx.sys.describe(), "grid_n": ctx.n,
        "rows": [r.__dict__ for r in rows],
        "pressure_second_differences": second,
        "flagged": [r.beta for r in rows if not r.converged],
    }


COMMANDS = {
    "spectrum": cmd_spectrum,
    "normalize": cmd_normalize,
    "pressure": cmd_pressure,
    "entropy": cmd_entropy,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "holonomy": cmd_holonomy,
    "beta-sweep": cmd_beta_sweep,
}


def run_subcommand(name: str, cfg: Config, out) -> int:
    out = Path(out)
    ctx = Context(cfg, out)
    try:
        report = COMMANDS[name](ctx)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, SpectralError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    report["notes"] = ctx.notes
    report["subcommand"] = name
    _write_report(out, name, report)
    if name == "verify" and not report["passed"]:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifsthermo", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default=".", help="directory for reports")
    parser.add_argument("--grid-n", type=int, help="grid size (even)")
    parser.add_argument("--tol", type=float, help="power-iteration tolerance")
    parser.add_argument("--seed", type=int, help="random seed for simulate")
    parser.add_argument("--beta", help="comma separated beta values for beta-sweep")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_flags(load_config(args.config), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_subcommand(args.subcommand, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())

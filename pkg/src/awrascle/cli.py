"""Batch entry point.

    awrascle --config configs/default.cfg --experiment blowup --out-dir out

Exit codes: 0 when every enabled check passes, 1 when a check fails,
2 for configuration errors and 3 when the scenario is rejected.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .characteristics import Numerics, Scenario
from .errors import ConfigError, ScenarioRejected
from .euler_map import char1_curve, discontinuity_curve, sample_eulerian_points
from .experiments import (SweepConfig, blowup_convergence, convergence_curves,
                          convergence_velocity, sweep_errors, weak_refinement,
                          write_convergence_csv)
from .fields import verify_density_bounds
from .initial_data import InitialData, parse_function
from .pressure import from_config
from .pressureless import PressurelessSolution, discontinuity_bar, eulerian_bar

log = logging.getLogger(__name__)

EXPERIMENTS = ("solve", "bounds", "blowup", "converge", "weak", "all")

DEFAULTS = {
    "cli": {"seed": "0"},
    "pressure": {"pressure": "log"},
    "initial_data": {"u0": "expr:neg_tanh()", "g0": "step:0,1,2"},
    "characteristics": {"epsilon": "0.1", "window": "-5, 5"},
    "fields": {"bounds_ny": "101", "bounds_ntau": "51", "bounds_tau_frac": "0.9"},
    "euler_map": {"nx": "201", "nt": "101", "t_end": "0.5", "seed_x": "1", "seed_t": "0",
                  "jump_tol": "1e-6"},
    "experiments": {"epsilons": "0.2, 0.1, 0.05, 0.025, 0.0125", "t_star": "0.5",
                    "nx": "201", "nt": "101", "seeds": "0:0.5",
                    "blowup_epsilons": "0.2, 0.1, 0.05", "tol_tb": "1e-3",
                    "slope_min": "1.7", "slope_max": "2.3", "min_r2": "0.98",
                    "n_test": "8", "weak_grids": "8, 16", "weak_ratio": "3"},
}
NUMERIC_KEYS = {f.name: f.type for f in dataclasses.fields(Numerics)}


@dataclass
class RunManifest:
    config_digest: str
    experiment: str
    outputs: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_dict(self):
        return {"config_digest": self.config_digest, "experiment": self.experiment,
                "outputs": [str(p) for p in self.outputs], "checks": self.checks,
                "passed": self.passed}


# ------------------------------------------------------------------ config

def load_config(path: str | Path | None, overrides=(), seed=None, grid_n=None):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.read_dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override must be key=value, got {item!r}")
        section, dot, name = key.strip().rpartition(".")
        if not dot:
            hits = [s for s in cp.sections() if cp.has_option(s, name)]
            if len(hits) != 1:
                raise ConfigError(f"override key {name!r} is ambiguous or unknown; use section.key")
            section = hits[0]
        if not cp.has_section(section):
            raise ConfigError(f"unknown section {section!r}")
        cp.set(section, name, value.strip())
    if seed is not None:
        cp.set("cli", "seed", str(seed))
    if grid_n is not None:
        cp.set("characteristics", "grid_n", str(grid_n))
    return cp


def canonical(cp: configparser.ConfigParser) -> str:
    lines = []
    for sec in sorted(cp.sections()):
        for key in sorted(cp.options(sec)):
            lines.append(f"{sec}.{key}={cp.get(sec, key)}")
    return "\n".join(lines) + "\n"


def digest(cp) -> str:
    return hashlib.sha256(canonical(cp).encode("utf-8")).hexdigest()


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _get(cp, sec, key, conv):
    try:
        return conv(cp.get(sec, key))
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad value for {sec}.{key}: {exc}") from exc


def build_scenario(cp, base_dir=None) -> Scenario:
    try:
        model = from_config(cp.get("pressure", "pressure"), base_dir)
        u0 = parse_function(cp.get("initial_data", "u0"), base_dir)
        g0 = parse_function(cp.get("initial_data", "g0"), base_dir)
    except (OSError, ValueError) as exc:
        if isinstance(exc, ScenarioRejected):
            raise
        raise ConfigError(str(exc)) from exc
    try:
        data = InitialData(u0, g0)
    except ValueError as exc:
        raise ScenarioRejected(str(exc)) from exc
    eps = _get(cp, "characteristics", "epsilon", float)
    window = _get(cp, "characteristics", "window", _floats)
    if len(window) != 2 or not window[0] < window[1]:
        raise ConfigError("characteristics.window needs two increasing numbers")
    kw = {}
    for key in cp.options("characteristics"):
        if key in ("epsilon", "window"):
            continue
        if key not in NUMERIC_KEYS:
            raise ConfigError(f"unknown key characteristics.{key}")
        kw[key] = _get(cp, "characteristics", key, int if NUMERIC_KEYS[key] in (int, "int") else float)
    return Scenario(model, data, eps, tuple(window), Numerics(**kw))


def _seeds(text: str):
    out = []
    for part in text.split(","):
        if part.strip():
            x, _, t = part.partition(":")
            out.append((float(x), float(t)))
    return tuple(out)


# ------------------------------------------------------------- experiments

def run_solve(s: Scenario, cp, out: Path, man: RunManifest):
    nx = _get(cp, "euler_map", "nx", int)
    nt = _get(cp, "euler_map", "nt", int)
    t_end = _get(cp, "euler_map", "t_end", float)
    if not t_end < s.horizon:
        raise ConfigError(f"euler_map.t_end = {t_end} is not below the blow-up horizon {s.horizon:.6g}")
    sol = PressurelessSolution(s.data, s.window, s.numerics.grid_n)
    xs = np.linspace(s.window[0], s.window[1], nx)
    ts = np.linspace(0.0, t_end, nt)
    X, T = (a.ravel() for a in np.meshgrid(xs, ts))
    smp = sample_eulerian_points(s, X, T)
    rb, ub, uxb = eulerian_bar(sol, X, T)
    rows = zip(X, T, smp.rho, smp.u, smp.u_x, smp.lambda1, smp.lambda2, rb, ub, uxb)
    man.outputs.append(_io.write_csv(out / "fields.csv", (
        "x", "t", "rho", "u", "u_x", "lambda1", "lambda2", "bar_rho", "bar_u", "bar_u_x"), rows))
    man.checks["solve.lambda1_below_lambda2"] = bool(np.all(smp.lambda1 < smp.lambda2))
    sx = _get(cp, "euler_map", "seed_x", float)
    st = _get(cp, "euler_map", "seed_t", float)
    t_seed = ts[ts >= st] if st <= t_end else ts
    x1 = np.full(ts.shape, math.nan)
    if st <= t_end:
        x1[ts >= st] = char1_curve(s, sx, st, t_seed)
    if s.x_jump is not None:
        curve = discontinuity_curve(s, ts)
        xb = discontinuity_bar(sol, s.x_jump, ts)
        x2 = curve.x
        man.checks["solve.velocity_continuous_across_curve"] = bool(
            np.max(np.abs(curve.velocity_jump)) <= _get(cp, "euler_map", "jump_tol", float))
    else:
        x2 = xb = np.full(ts.shape, math.nan)
    man.outputs.append(_io.write_csv(out / "curves.csv", ("t", "x2_eps", "x_bar", "x1_from_seed"),
                                     zip(ts, x2, xb, x1)))


def run_bounds(s: Scenario, cp, out: Path, man: RunManifest):
    ny = _get(cp, "fields", "bounds_ny", int)
    nt = _get(cp, "fields", "bounds_ntau", int)
    frac = _get(cp, "fields", "bounds_tau_frac", float)
    ys = np.linspace(s.window[0], s.window[1], ny)
    taus = np.linspace(0.0, frac * s.horizon, nt)
    rep = verify_density_bounds(s, ys, taus)
    header, *rows = rep.csv_rows()
    man.outputs.append(_io.write_csv(out / "bounds.csv", header, rows))
    man.checks["bounds.density_lower_bound"] = rep.passed


def _sweep_config(s: Scenario, cp, out: Path) -> SweepConfig:
    return SweepConfig(s, epsilons=_get(cp, "experiments", "epsilons", _floats),
                       t_star=_get(cp, "experiments", "t_star", float),
                       nx=_get(cp, "experiments", "nx", int), nt=_get(cp, "experiments", "nt", int),
                       seeds=_get(cp, "experiments", "seeds", _seeds))


def run_converge(s: Scenario, cp, out: Path, man: RunManifest):
    try:
        cfg = _sweep_config(s, cp, out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    table = sweep_errors(cfg)
    man.outputs.append(write_convergence_csv(out / "convergence.csv", table[0]))
    band = (_get(cp, "experiments", "slope_min", float), _get(cp, "experiments", "slope_max", float))
    r2 = _get(cp, "experiments", "min_r2", float)
    reports = {"u": convergence_velocity(cfg, table), **convergence_curves(cfg, table)}
    for name in ("u", "lambda1", "lambda2", "x2"):
        rep = reports[name]
        log.info("rate %s: slope %.4f R2 %.6f", name, rep.slope, rep.r2)
        man.checks[f"converge.rate_{name}"] = rep.in_band(band, r2)


def run_blowup(s: Scenario, cp, out: Path, man: RunManifest):
    rep = blowup_convergence(s, _get(cp, "experiments", "blowup_epsilons", _floats),
                             _get(cp, "experiments", "tol_tb", float), out_dir=out)
    man.outputs.append(out / "blowup.csv")
    for k, v in rep.checks.items():
        man.checks[f"blowup.{k}"] = bool(v)


def run_weak(s: Scenario, cp, out: Path, man: RunManifest):
    grids = tuple(int(g) for g in _get(cp, "experiments", "weak_grids", _floats))
    rows = weak_refinement(s, grids, _get(cp, "experiments", "n_test", int),
                           _get(cp, "cli", "seed", int), out_dir=out)
    man.outputs.append(out / "weak.csv")
    ratio = _get(cp, "experiments", "weak_ratio", float)
    ok = True
    for a, b in zip(rows, rows[1:]):
        for i in (1, 2):
            # residuals already at round-off cannot shrink further
            if a[i] > 1e-12 and b[i] * ratio > a[i]:
                ok = False
    man.checks["weak.refinement_ratio"] = ok


RUNNERS = {"solve": run_solve, "bounds": run_bounds, "blowup": run_blowup,
           "converge": run_converge, "weak": run_weak}


def run(argv=None) -> tuple[RunManifest | None, int]:
    ap = argparse.ArgumentParser(prog="awrascle", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--experiment", choices=EXPERIMENTS, default="all")
    ap.add_argument("--out-dir", default="out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--grid-n", type=int)
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out_dir)
    try:
        cp = load_config(args.config, args.override, args.seed, args.grid_n)
        s = build_scenario(cp, Path(args.config).parent)
        man = RunManifest(digest(cp), args.experiment)
        names = [n for n in EXPERIMENTS[:-1]] if args.experiment == "all" else [args.experiment]
        for name in names:
            RUNNERS[name](s, cp, out, man)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None, 2
    except ScenarioRejected as exc:
        where = "" if exc.jump is None else f" [jump x={exc.jump:g}, margin={exc.margin:.6g}]"
        print(f"scenario rejected: {exc}{where}", file=sys.stderr)
        return None, 3
    _io.write_json(out / "manifest.json", man.as_dict())
    for k, v in man.checks.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return man, 0 if man.passed else 1


def main(argv=None) -> int:
    return run(argv)[1]


if __name__ == "__main__":
    sys.exit(main())

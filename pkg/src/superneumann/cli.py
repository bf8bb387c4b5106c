"""Command-line front end.

Every run writes its outputs plus the fully resolved configuration
(``config.json``) into the output directory; feeding that file back through
``--config`` reproduces the run.  Output is deterministic: numbers carry 15
significant digits and files use LF line endings.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import ParameterError, ProblemParams, band_index, derive_constants
from .numerics import DEFAULT_TOLERANCES, NoSignChange, QuadratureFailure, StiffnessFailure
from .sublinear import BlowUpError

SCHEMA = "1"

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "lambda": None,
    "p": 3.0,
    "b": 1.0,
    "c": 1.0,
    "c_left": None,
    "c_right": None,
    "alpha": 0.0,
    "alpha_min": 0.002,
    "alpha_max": 0.498,
    "alpha_steps": 200,
    "format": "csv",
    "out": "out",
    "tol_quad": DEFAULT_TOLERANCES.quad_rtol,
    "tol_root": DEFAULT_TOLERANCES.root_tol,
    "grid": None,
    "energies": [],
    "validate": True,
    "reference": True,
}

GRID_DEFAULTS = {"solve": 1001, "timemaps": 400, "phase": 400, "diagram": None, "multiplicity": None}


class InputError(ValueError):
    pass


# formatting -----------------------------------------------------------------

def fmt(v) -> str:
    """15 significant digits; blank for missing values."""
    if v is None:
        return ""
    v = float(v)
    if not math.isfinite(v):
        return "" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return f"{v + 0.0:.15g}"  # folds -0 into 0


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.15g}") if math.isfinite(v) else None
    return obj


def write_json(path: Path, payload: dict):
    doc = {"schema": SCHEMA, **payload}
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n", encoding="utf-8", newline="\n")


def write_csv(path: Path, header, rows, formatter=fmt):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else formatter(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_table(path_stem: Path, fmt_name, header, rows):
    """A table as CSV or as a JSON document with column names."""
    if fmt_name == "json":
        records = [{h: (v if isinstance(v, str) else _clean(v)) for h, v in zip(header, row)} for row in rows]
        write_json(path_stem.with_suffix(".json"), {"columns": list(header), "rows": records})
    else:
        write_csv(path_stem.with_suffix(".csv"), header, rows)


# configuration --------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with any of the options below; flags override it")
    common.add_argument("--lambda", dest="lambda_", type=float)
    common.add_argument("--p", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--c", type=float, help="common value of both negative weights")
    common.add_argument("--c-left", type=float)
    common.add_argument("--c-right", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--alpha-min", type=float)
    common.add_argument("--alpha-max", type=float)
    common.add_argument("--alpha-steps", type=int)
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol-quad", type=float, help="relative quadrature tolerance")
    common.add_argument("--tol-root", type=float, help="root-finder tolerance")
    common.add_argument("--grid", type=int, help="samples per profile, table or polyline")
    common.add_argument("--energies", type=str, help="comma separated orbit levels (phase)")
    common.add_argument("--no-validate", dest="validate", action="store_const", const=False,
                        help="skip profile validation of diagram samples")
    common.add_argument("--no-reference", dest="reference", action="store_const", const=False,
                        help="skip the symmetric reference sweep for unequal weights")
    parser = argparse.ArgumentParser(prog="superneumann",
                                     description="Positive solutions of a Neumann problem with indefinite weight.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "enumerate and validate all solutions"),
                       ("timemaps", "tabulate the time maps"),
                       ("phase", "phase-plane polylines"),
                       ("diagram", "bifurcation diagram in alpha"),
                       ("multiplicity", "solution count against the lower bound")):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS) - {"schema", "command"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in loaded.items() if k in DEFAULTS})
    flags = vars(args)
    for key in DEFAULTS:
        flag = "lambda_" if key == "lambda" else key
        if flags.get(flag) is not None:
            cfg[key] = flags[flag]
    if isinstance(cfg["energies"], str):
        try:
            cfg["energies"] = [float(e) for e in cfg["energies"].split(",") if e.strip()]
        except ValueError as exc:
            raise InputError(f"bad --energies list: {exc}") from exc
    if cfg["lambda"] is None:
        raise InputError("--lambda is required")
    if cfg["c_left"] is None:
        cfg["c_left"] = cfg["c"]
    if cfg["c_right"] is None:
        cfg["c_right"] = cfg["c"]
    if cfg["grid"] is None:
        cfg["grid"] = GRID_DEFAULTS[args.command]
    if cfg["grid"] is not None and cfg["grid"] < 2:
        raise InputError("--grid must be at least 2")
    for key in ("tol_quad", "tol_root"):
        if not cfg[key] > 0.0:
            raise InputError(f"{key} must be positive")
    cfg["command"] = args.command
    return cfg


def params_of(cfg) -> ProblemParams:
    return ProblemParams(lam=cfg["lambda"], p=cfg["p"], b=cfg["b"], c_left=cfg["c_left"],
                         c_right=cfg["c_right"], alpha=cfg["alpha"])


def tolerances_of(cfg):
    return replace(DEFAULT_TOLERANCES, quad_rtol=cfg["tol_quad"], root_tol=cfg["tol_root"])


def _grid_spec(cfg):
    from .bifurcation import AlphaGrid
    return AlphaGrid(alpha_min=cfg["alpha_min"], alpha_max=cfg["alpha_max"], steps=cfg["alpha_steps"])


# subcommands ----------------------------------------------------------------

def cmd_solve(cfg, out: Path) -> int:
    from .matching import enumerate_solutions
    params, tol = params_of(cfg), tolerances_of(cfg)
    records = enumerate_solutions(params, tol, grid_size=cfg["grid"])
    entries = []
    for i, rec in enumerate(records):
        name = f"profile_{i:03d}.csv"
        entries.append({**rec.summary(), "profile": name})
        write_csv(out / name, ("t", "u", "v"), rec.profile.as_rows(), formatter=lambda v: f"{v:.12e}")
    write_json(out / "solutions.json", {"params": _params_dict(params), "count": len(records),
                                        "solutions": entries})
    if not records:
        print("no solutions found although existence is guaranteed", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def _params_dict(params):
    return {"lambda": params.lam, "p": params.p, "b": params.b, "c_left": params.c_left,
            "c_right": params.c_right, "alpha": params.alpha}


def cmd_timemaps(cfg, out: Path) -> int:
    from .matching import j_max_for
    params, tol = params_of(cfg), tolerances_of(cfg)
    j_max = j_max_for(params)
    n = cfg["grid"]
    consts = derive_constants(params)
    if params.alpha == 0.0:
        from .superlinear import SuperlinearMaps
        maps = SuperlinearMaps(params.lam, params.b, params.p, tol)
        xs = np.linspace(0.0, consts.u_h, n + 2)[1:-1]
        xs = np.unique(np.append(xs, consts.omega))
        rows = []
        for x in xs:
            t1 = maps.t1(x)
            rows.append([x] + [k * t1 for k in range(1, j_max + 1)]
                        + ["D1" if x < consts.omega else ("center" if x == consts.omega else "D2")])
        header = ["x"] + [f"T_{k}" for k in range(1, j_max + 1)] + ["domain"]
        write_table(out / "timemaps", cfg["format"], header, rows)
        write_json(out / "summary.json", {"params": _params_dict(params), "mode": "alpha0",
                                          "omega": consts.omega, "u_h": consts.u_h})
        return EXIT_OK
    from .timemaps import CurveOrbitGeometry
    geometry = CurveOrbitGeometry(params, tol)
    x_max = 1.5 * geometry.x_h
    xs = np.unique(np.concatenate([np.linspace(0.0, x_max, n + 1)[1:], [geometry.x_t]]))
    rows = []
    for x in xs:
        sc = geometry.schedule(float(x))
        closed = sc.e0 < 0.0
        taus = [sc.tau_j(j) if (j == 1 or closed) else math.nan for j in range(1, j_max + 1)]
        rows.append([x] + taus + [sc.period if closed else math.nan, geometry.domain(float(x))])
    header = ["x"] + [f"tau_{j}" for j in range(1, j_max + 1)] + ["tau", "domain"]
    write_table(out / "timemaps", cfg["format"], header, rows)
    write_json(out / "summary.json", {"params": _params_dict(params), "mode": "connection",
                                      "x_t": geometry.x_t, "x_h": geometry.x_h,
                                      "x_t_right": geometry.x_t_right, "x_h_right": geometry.x_h_right,
                                      "s_infinity": geometry.left.s_inf,
                                      "s_infinity_right": geometry.right.s_inf,
                                      "omega": consts.omega, "u_h": consts.u_h,
                                      "warnings": geometry.warnings})
    return EXIT_OK


def cmd_phase(cfg, out: Path) -> int:
    from .superlinear import homoclinic_v, sample_orbit, turning_points
    from .sublinear import LEFT, RIGHT, GammaCurve
    params, tol = params_of(cfg), tolerances_of(cfg)
    consts = derive_constants(params)
    n = cfg["grid"]
    lam, b, p = params.lam, params.b, params.p
    x_end = 1.5 * consts.u_h
    if params.alpha == 0.0:
        xs = np.linspace(0.0, x_end, n)
        g0 = [(x, 0.0) for x in xs]
        g1 = list(g0)
    else:
        left = GammaCurve.from_params(params, LEFT, tol)
        right = left if params.is_symmetric else GammaCurve.from_params(params, RIGHT, tol)
        xs = np.linspace(0.0, x_end, n)
        g0 = [(x, left.y(x)) for x in xs]
        g1 = [(x, -abs(right.y(x))) for x in xs]
    write_table(out / "gamma0", cfg["format"], ("u", "v"), g0)
    write_table(out / "gamma1", cfg["format"], ("u", "v"), g1)
    theta = np.linspace(0.0, math.pi, n)
    us = 0.5 * consts.u_h * (1.0 - np.cos(theta))
    hom = [(u, homoclinic_v(u, lam, b, p)) for u in us]
    hom[-1] = (consts.u_h, 0.0)
    write_table(out / "homoclinic", cfg["format"], ("u", "v"), hom)
    orbits = []
    for i, e0 in enumerate(cfg["energies"]):
        sl = turning_points(e0, lam, b, p)
        write_table(out / f"orbit_{i:02d}", cfg["format"], ("u", "v"), sample_orbit(sl, n))
        orbits.append({"index": i, "energy": e0, "m": sl.m, "M": sl.M, "class": sl.classification})
    write_json(out / "phase.json", {"params": _params_dict(params), "omega": consts.omega,
                                    "u_h": consts.u_h, "orbits": orbits})
    return EXIT_OK


GNUPLOT = """set datafile separator ','
set key off
set xlabel 'alpha'
set ylabel 'u(alpha)'
set logscale y
set xrange [0:0.5]
plot for [i=0:{last}] 'branches.csv' using ($1==i ? $2 : 1/0):3 with lines
"""


def cmd_diagram(cfg, out: Path) -> int:
    from .bifurcation import asymmetric_sweep, sweep_diagram
    params, tol = params_of(cfg), tolerances_of(cfg)
    grid = _grid_spec(cfg)
    if params.is_symmetric:
        diagram = sweep_diagram(params, grid, tol, validate=cfg["validate"])
    else:
        reference = None
        if cfg["reference"]:
            reference = sweep_diagram(replace(params, c_right=params.c_left), grid, tol,
                                      validate=cfg["validate"])
        diagram = asymmetric_sweep(params, grid, tol, validate=cfg["validate"], reference=reference)
    rows = [(b.id, s.alpha, s.x, s.j, s.domain, int(s.validated)) for b in diagram.branches for s in b.samples]
    write_csv(out / "branches.csv", ("branch_id", "alpha", "x", "j", "domain", "validated"),
              [[str(r[0]), r[1], r[2], str(r[3]), r[4], str(r[5])] for r in rows])
    write_json(out / "criticals.json", {"params": _params_dict(params), **diagram.criticals.as_dict(),
                                        "junctions": [j.as_dict() for j in diagram.junctions]})
    write_json(out / "components.json", {"params": _params_dict(params),
                                         "classification": diagram.classification(),
                                         "components": diagram.components,
                                         "branches": [b.as_dict() for b in diagram.branches],
                                         "warnings": diagram.warnings})
    (out / "diagram.gp").write_text(GNUPLOT.format(last=max(len(diagram.branches) - 1, 0)),
                                    encoding="utf-8", newline="\n")
    return EXIT_OK


def cmd_multiplicity(cfg, out: Path) -> int:
    from .matching import count_and_classify
    params, tol = params_of(cfg), tolerances_of(cfg)
    summary = count_and_classify(params, tol=tol)
    write_json(out / "multiplicity.json", {"params": _params_dict(params), **summary.as_dict()})
    return EXIT_EMPTY if summary.count == 0 else EXIT_OK


COMMANDS = {"solve": cmd_solve, "timemaps": cmd_timemaps, "phase": cmd_phase,
            "diagram": cmd_diagram, "multiplicity": cmd_multiplicity}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        params_of(cfg)
        _grid_spec(cfg)
    except (InputError, ParameterError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "config.json", {k: v for k, v in cfg.items() if k != "out"} | {"out": str(out)})
        code = COMMANDS[cfg["command"]](cfg, out)
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (QuadratureFailure, StiffnessFailure, NoSignChange, BlowUpError, FloatingPointError,
            ArithmeticError, AssertionError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return code


if __name__ == "__main__":
    sys.exit(main())

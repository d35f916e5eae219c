"""Command-line entry point: ``stratrt <subcommand> [options]``.

Exit codes: 0 success, 1 invalid input, 2 the solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .atmosphere import (Scenario, build_spectrum, greenhouse_compare, load_transmittance,
                         load_bundled_transmittance, run_scenario,
                         validate_scenario_values)
from .errors import ConfigError, ConvergenceError
from .grey import GreyConfig, Terrain2D, equilibrium_temperature, grey_iterate, grey_solve_2d
from .specfun import specfun_table

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    duration_s: float = 0.0
    report: dict = field(default_factory=dict)
    version: str = __version__

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir).resolve() / "manifest.json"
        data = asdict(self)
        data["outputs"] = [str(Path(p).resolve()) for p in self.outputs]
        data["inputs"] = {k: str(Path(v).resolve()) for k, v in self.inputs.items()}
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


# ------------------------------------------------------------------ config schemas

_GREY_SKIP = {"boundary_sources"}
_TERRAIN_KEYS = {"shape": "quarter_disc", "width": 30.0, "depth": 10.0, "z_top": 10.0,
                 "shore_fraction": 0.9, "n_x": 31, "n_sigma": 40}


def _grey_schema(two_d=False):
    schema = {f.name: f.default for f in fields(GreyConfig) if f.name not in _GREY_SKIP}
    if two_d:
        schema["bc_bottom"] = "equilibrium"
        schema.update(_TERRAIN_KEYS)
    else:
        schema["n_intervals"] = 200
    return schema


SCHEMAS = {
    "grey1d": lambda: _grey_schema(False),
    "grey2d": lambda: _grey_schema(True),
    "atmosphere": lambda: {f.name: f.default for f in fields(Scenario)},
    "greenhouse": lambda: {f.name: f.default for f in fields(Scenario)},
}


def _check_type(name, value, default):
    """Returns an error message or None; the default fixes the expected type."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
        kind = "a boolean"
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
        kind = "an integer"
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        kind = "a number"
    elif isinstance(default, tuple):
        ok = (isinstance(value, list) and len(value) == len(default)
              and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value))
        kind = f"a list of {len(default)} numbers"
    elif name.startswith("bc_"):
        ok = isinstance(value, str) or (isinstance(value, (int, float)) and not isinstance(value, bool))
        kind = "a number or a string"
    else:
        ok = isinstance(value, str)
        kind = "a string"
    return None if ok else f"{name}: expected {kind}, got {value!r}"


def validate_config(raw: dict, subcommand: str) -> dict:
    """Check keys and types against the subcommand schema and inject defaults.

    Range checks run when the typed config object is built.  All problems
    are collected into one :class:`ConfigError`.
    """
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    schema = SCHEMAS[subcommand]()
    errors = [f"{k}: unknown key" for k in raw if k not in schema]
    for k, v in raw.items():
        if k in schema:
            msg = _check_type(k, v, schema[k])
            if msg:
                errors.append(msg)
    resolved = dict(schema)
    resolved.update({k: v for k, v in raw.items() if k in schema and not _check_type(k, v, schema[k])})
    for k, v in resolved.items():
        if isinstance(schema[k], tuple):
            resolved[k] = tuple(float(a) for a in v)
        elif isinstance(schema[k], float) and not isinstance(v, bool):
            resolved[k] = float(v)
    if subcommand in ("atmosphere", "greenhouse"):
        errors += validate_scenario_values(resolved)
    if errors:
        raise ConfigError(errors)
    return resolved


def _read_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {p}"])
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{p}: invalid JSON ({exc})"]) from None


def _split(resolved: dict, keys):
    return {k: resolved[k] for k in keys if k in resolved}


# ------------------------------------------------------------------ output helpers

def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header, columns) -> Path:
    rows = zip(*[np.asarray(c).ravel() for c in columns])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _grey_report_csv(out: Path, report) -> Path:
    n = np.arange(1, report.n_iter + 1)
    return write_csv(out / "report.csv", ["n", "sup_increment", "min_increment"],
                     [n, report.sup_increment, report.min_increment])


def _atm_report_csv(path: Path, report) -> Path:
    n = np.arange(1, report.n_iter + 1)
    return write_csv(path, ["n", "sup_dT", "source_norm", "ratio"],
                     [n, report.sup_increment, report.source_norm, report.ratio])


def resolve_threads(flag):
    if flag is not None:
        return int(flag)
    env = os.environ.get("STRATRT_THREADS")
    if env is None or env == "":
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError([f"STRATRT_THREADS: expected an integer, got {env!r}"]) from None


# ------------------------------------------------------------------ subcommands

def _cmd_specfun_table(args, out: Path, manifest: RunManifest):
    xs = np.logspace(-6, np.log10(50.0), 61)
    table = np.array(specfun_table(xs))
    manifest.config = {"x_min": 1e-6, "x_max": 50.0, "n": int(xs.size)}
    path = write_csv(out / "specfun.csv", ["x", "E1", "E2", "E3", "E5"], table.T)
    manifest.outputs.append(path)
    return True


def _grey_config(resolved):
    keys = [f.name for f in fields(GreyConfig) if f.name not in _GREY_SKIP]
    return GreyConfig(**_split(resolved, keys))


def _cmd_grey1d(args, resolved, out: Path, manifest: RunManifest):
    cfg = _grey_config(resolved)
    profile, report = grey_iterate(cfg, n_intervals=resolved["n_intervals"])
    z = profile.coords
    manifest.outputs.append(write_csv(out / "temperature.csv", ["z", "T_e", "T"],
                                      [z, equilibrium_temperature(cfg, z), profile.T]))
    manifest.outputs.append(_grey_report_csv(out, report))
    manifest.report = report.summary()
    return report.converged


def _cmd_grey2d(args, resolved, out: Path, manifest: RunManifest):
    cfg = _grey_config(resolved)
    if resolved["shape"] == "quarter_disc":
        terrain = Terrain2D.quarter_disc(resolved["width"], resolved["depth"], resolved["z_top"],
                                         resolved["shore_fraction"], resolved["n_x"], resolved["n_sigma"])
    elif resolved["shape"] == "flat":
        terrain = Terrain2D.flat(resolved["width"], resolved["z_top"] - resolved["depth"],
                                 resolved["z_top"], resolved["n_x"], resolved["n_sigma"])
    else:
        raise ConfigError([f"shape: expected 'quarter_disc' or 'flat', got {resolved['shape']!r}"])
    T, report = grey_solve_2d(terrain, cfg)
    zz = terrain.node_z()
    Te = np.empty_like(zz)
    for i, zb in enumerate(terrain.z_bottom):
        col = GreyConfig(**{**asdict(cfg), "z_range": (float(zb), terrain.z_top)})
        Te[i] = equilibrium_temperature(col, zz[i])
    xx = np.broadcast_to(terrain.x[:, None], zz.shape)
    manifest.outputs.append(write_csv(out / "temperature.csv", ["x", "z", "T_e", "T"], [xx, zz, Te, T]))
    manifest.outputs.append(_grey_report_csv(out, report))
    manifest.report = report.summary()
    return report.converged


def _load_spectrum_table(args, manifest):
    if args.spectrum is None:
        return load_bundled_transmittance()
    p = Path(args.spectrum)
    if not p.is_file():
        raise ConfigError([f"spectrum file not found: {p}"])
    manifest.inputs["spectrum"] = p
    try:
        return load_transmittance(p)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None


def _write_scenario(out: Path, prefix: str, result, spectrum, manifest):
    manifest.outputs.append(write_csv(out / f"{prefix}temperature.csv",
                                      ["z_km", "tau", "T_scaled", "T_kelvin"],
                                      [result.z_km, result.tau, result.T, result.T_kelvin]))
    manifest.outputs.append(write_csv(out / f"{prefix}outgoing.csv", ["x", "kappa", "J_at_Z"],
                                      [spectrum.freq_nodes, spectrum.kappa, result.J_at_Z]))
    manifest.outputs.append(_atm_report_csv(out / f"{prefix}report.csv", result.report))


def _cmd_atmosphere(args, resolved, out: Path, manifest: RunManifest):
    scenario = Scenario(**resolved)
    table = _load_spectrum_table(args, manifest)
    spectrum = build_spectrum(table, scenario)
    result = run_scenario(scenario, spectrum, threads=args.threads, sensitivities=args.sensitivities)
    _write_scenario(out, "", result, spectrum, manifest)
    manifest.report = result.report.summary()
    return result.report.converged


def _parse_window(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError([f"--window: expected 'lo,hi', got {text!r}"]) from None
    if lo > hi:
        raise ConfigError([f"--window: lo must not exceed hi, got {text!r}"])
    return lo, hi


def _cmd_greenhouse(args, resolved, out: Path, manifest: RunManifest):
    if args.window is None:
        raise ConfigError(["--window is required"])
    window = _parse_window(args.window)
    if not args.blocked_kappa > 0:
        raise ConfigError(["--blocked-kappa must be > 0"])
    scenario = Scenario(**resolved)
    spectrum = build_spectrum(_load_spectrum_table(args, manifest), scenario)
    try:
        cmp = greenhouse_compare(scenario, spectrum, window, args.blocked_kappa, threads=args.threads)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    _write_scenario(out, "", cmp.base, spectrum, manifest)
    blocked_spec = spectrum.with_kappa(cmp.blocked.kappa)
    _write_scenario(out, "blocked_", cmp.blocked, blocked_spec, manifest)
    manifest.outputs.append(write_csv(out / "delta_T.csv", ["z_km", "tau", "delta_T"],
                                      [cmp.base.z_km, cmp.base.tau, cmp.delta_T]))
    manifest.config.update(window=list(window), blocked_kappa=args.blocked_kappa)
    manifest.report = {"base": cmp.base.report.summary(), "blocked": cmp.blocked.report.summary(),
                       "delta_T0": cmp.delta_T0, "ground_warming": cmp.ground_warming,
                       "window_dimmed": cmp.window_dimmed}
    return cmp.base.report.converged and cmp.blocked.report.converged


_HANDLERS = {"grey1d": _cmd_grey1d, "grey2d": _cmd_grey2d,
             "atmosphere": _cmd_atmosphere, "greenhouse": _cmd_greenhouse}


def _apply_overrides(resolved, subcommand, args):
    if args.tol is not None:
        resolved["tol"] = float(args.tol)
    if args.max_iters is not None:
        key = "outer_iters" if subcommand.startswith("grey") else "max_iters"
        resolved[key] = int(args.max_iters)
    return resolved


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratrt", description="Radiative transfer in stratified media.")
    parser.add_argument("--version", action="version", version=f"stratrt {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def common(p, spectral=False):
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        if p.prog.split()[-1] != "specfun-table":
            p.add_argument("--config", help="flat JSON config; omitted keys take defaults")
            p.add_argument("--tol", type=float, help="override the convergence tolerance")
            p.add_argument("--max-iters", type=int, help="override the outer iteration cap")
        if spectral:
            p.add_argument("--spectrum", help="transmittance CSV (default: bundled table)")
            p.add_argument("--threads", type=int, help="worker threads, 0 = all cores "
                           "(default: $STRATRT_THREADS or 1)")

    common(sub.add_parser("specfun-table", help="E_n table for x in [1e-6, 50]"))
    common(sub.add_parser("grey1d", help="one-dimensional grey lake"))
    common(sub.add_parser("grey2d", help="two-dimensional grey lake cross-section"))
    p = sub.add_parser("atmosphere", help="spectral atmosphere column")
    common(p, spectral=True)
    p.add_argument("--sensitivities", action="store_true",
                   help="also record dT(0)/dQ- and dT(0)/d(ground albedo)")
    p = sub.add_parser("greenhouse", help="window-blocking comparison")
    common(p, spectral=True)
    p.add_argument("--window", help="frequency window 'lo,hi' in scaled units")
    p.add_argument("--blocked-kappa", type=float, default=5.0, help="kappa inside the window")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage problems map to 1 here
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID

    out = Path(args.out)
    manifest = RunManifest(args.command, {})
    started = False
    t0 = time.perf_counter()
    status = EXIT_OK
    try:
        if hasattr(args, "threads"):
            args.threads = resolve_threads(args.threads)
            if args.threads < 0:
                raise ConfigError(["--threads must be >= 0"])
        if args.command == "specfun-table":
            out.mkdir(parents=True, exist_ok=True)
            started = True
            _cmd_specfun_table(args, out, manifest)
        else:
            raw = _read_config(args.config)
            resolved = _apply_overrides(validate_config(raw, args.command), args.command, args)
            if args.config:
                manifest.inputs["config"] = Path(args.config)
            manifest.config = {k: list(v) if isinstance(v, tuple) else v for k, v in resolved.items()}
            out.mkdir(parents=True, exist_ok=True)
            started = True
            if not _HANDLERS[args.command](args, resolved, out, manifest):
                print(f"stratrt {args.command}: not converged within the iteration cap", file=sys.stderr)
                status = EXIT_NOT_CONVERGED
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"error: {msg}", file=sys.stderr)
        status = EXIT_INVALID
    except ConvergenceError as exc:
        print(f"stratrt {args.command}: {exc}", file=sys.stderr)
        manifest.report = {"converged": False, **exc.diagnostics}
        status = EXIT_NOT_CONVERGED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_INVALID
    finally:
        if started:
            manifest.duration_s = time.perf_counter() - t0
            manifest.report.setdefault("converged", status == EXIT_OK)
            manifest.write(out)
    return status


if __name__ == "__main__":
    sys.exit(main())

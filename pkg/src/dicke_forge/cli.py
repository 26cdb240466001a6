"""Command-line front door: ``design``, ``pattern``, ``simulate`` and ``verify``.

Exit codes: 0 ok, 1 invalid input, 2 solver failure, 3 I/O failure.
JSON carries SI units; only the text table uses ps / ns / us / mrad.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, Preset, RunConfig, build_geometry, read_config_file
from .design import DesignError, DesignInputs, design_report, format_table
from .ensemble import GeometryError, make_linear_chain
from .protocol import ProtocolParams, analytic_detection_probability, run_many, summarize
from .radiation import Direction, QuadratureSpec, Weighting, coherence_factor, intensity
from .statevec import QubitLimitError
from .verify import DEFAULT_SIZES, default_checks, format_matrix, run_checks

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3
PATTERN_COLUMNS = ("theta_rad", "I_collective", "I_single_atom", "zeta")

_WEIGHTING = {"solid": Weighting.SOLID_ANGLE, "intensity": Weighting.INTENSITY}


def _n_list(text: str) -> tuple:
    try:
        vals = tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("at least one value needed")
    return vals


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", help="key=value config file; flags override it")
    g.add_argument("--preset", choices=[p.value for p in Preset])
    g.add_argument("--n", type=_n_list, help="ensemble size(s), comma separated")
    g.add_argument("--geometry", dest="geometry_file", help="geometry file (implies --preset custom)")
    g.add_argument("--seed", type=int)
    g.add_argument("--runs", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--budget", type=float, help="per-source error budget (default 0.2/N)")
    g.add_argument("--init-budget", type=float)
    g.add_argument("--target", type=float, help="success probability for N_tr (default 0.5)")
    g.add_argument("--weighting", choices=sorted(_WEIGHTING))
    g.add_argument("--interference-factor", type=float, choices=(0.5, 1.0))
    g.add_argument("--window-budget", choices=("pair", "each"))
    g.add_argument("--max-trials", type=int)
    g.add_argument("--rows", type=int, help="pattern rows over [0, pi] (default 2000)")
    g.add_argument("--fwhm", type=float, help="inhomogeneous linewidth in Hz")
    g.add_argument("--n-polar", type=int)
    g.add_argument("--n-azimuth", type=int)
    g.add_argument("--emission-rate-scale", type=float, help="multiplies S in simulate (0 disables emission)")
    g.add_argument("--workers", type=int)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="dicke-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("design", parents=[common], help="solve the error budgets and write design.json / design.txt")
    sub.add_parser("pattern", parents=[common], help="write the angular emission pattern as CSV")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo repeat-until-success runs")
    sub.add_parser("verify", parents=[common], help="run the identity and normalization checks")
    return parser


_FLAG_FIELDS = (
    "preset", "n", "geometry_file", "seed", "runs", "out", "budget", "init_budget", "target",
    "weighting", "interference_factor", "window_budget", "max_trials", "rows", "fwhm",
    "n_polar", "n_azimuth", "emission_rate_scale", "workers",
)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if "weighting" in values and values["weighting"] in _WEIGHTING:
        values["weighting"] = _WEIGHTING[values["weighting"]]
    if values.get("geometry_file") and "preset" not in values:
        values["preset"] = Preset.CUSTOM
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# helpers


def _header(cfg: RunConfig, command: str) -> dict:
    return {"artifact": "dicke-forge", "version": __version__, "command": command, "config": cfg.echo()}


def _sizes(cfg: RunConfig) -> tuple:
    # a geometry file fixes N itself
    return (None,) if cfg.preset is Preset.CUSTOM else cfg.n


def _inputs(cfg: RunConfig, geom) -> DesignInputs:
    quad = None
    if cfg.n_polar or cfg.n_azimuth:
        quad = QuadratureSpec(n_polar=cfg.n_polar or 256, n_azimuth=cfg.n_azimuth or 64)
    return DesignInputs(
        geom,
        budget=cfg.budget,
        target_probability=cfg.target,
        inhomogeneous_fwhm=cfg.linewidth,
        quad=quad,
        weighting=cfg.weighting,
        init_budget=cfg.init_budget,
        interference_factor=cfg.interference_factor,
    )


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_design(cfg: RunConfig) -> int:
    reports = [design_report(_inputs(cfg, build_geometry(cfg, n))) for n in _sizes(cfg)]
    out = _out_dir(cfg)
    _write_json(out / "design.json", {**_header(cfg, "design"), "reports": [r.to_dict() for r in reports]})
    table = format_table(reports)
    head = f"# dicke-forge {__version__} design\n# config: {json.dumps(cfg.echo(), sort_keys=True)}\n"
    (out / "design.txt").write_text(head + table, encoding="utf-8")
    sys.stdout.write(table)
    return EXIT_OK


def pattern_rows(geom, rows: int) -> np.ndarray:
    """Columns theta, collective intensity, single-emitter intensity, zeta in the plane phi = 0."""
    theta = np.linspace(0.0, math.pi, rows)
    axis = np.asarray(geom.axis)
    e1 = Direction.from_angles(0.5 * math.pi, 0.0, axis).vec
    dirs = np.cos(theta)[:, None] * axis + np.sin(theta)[:, None] * e1
    dirs[0] = axis  # exact forward direction
    single = make_linear_chain(1, 1.0, geom.wavelength, geom.lifetime, geom.pattern, axis=tuple(axis))
    return np.column_stack([
        theta,
        intensity(geom, None, dirs),
        intensity(single, None, dirs),
        coherence_factor(geom, None, dirs),
    ])


def cmd_pattern(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    for n in _sizes(cfg):
        geom = build_geometry(cfg, n)
        data = pattern_rows(geom, cfg.rows)
        path = out / f"pattern_n{geom.n}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# dicke-forge {__version__} pattern\n")
            fh.write(f"# config: {json.dumps(cfg.echo(), sort_keys=True)}\n")
            fh.write(f"# n={geom.n} wavelength_m={geom.wavelength!r} tau_s={geom.lifetime!r} "
                     f"pattern={geom.pattern.value}; intensities per steradian in 1/tau\n")
            w = csv.writer(fh)
            w.writerow(PATTERN_COLUMNS)
            for row in data:
                w.writerow([repr(float(v)) for v in row])
        print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    summaries = []
    for n in _sizes(cfg):
        geom = build_geometry(cfg, n)
        rep = design_report(_inputs(cfg, geom))
        params = ProtocolParams(
            geom,
            emission_rate_S=rep.S * cfg.emission_rate_scale,
            alpha_det=rep.alpha_det,
            t_det=rep.t_det,
            t_init=max(rep.t_init, 1e-3 * geom.lifetime),
            inhomogeneous_fwhm=cfg.linewidth,
            max_trials=cfg.max_trials,
            seed=cfg.seed,
            interference_factor=cfg.interference_factor,
            window_budget=cfg.window_budget,
        )
        results = run_many(params, cfg.runs, cfg.workers)
        with open(out / f"runs_n{geom.n}.jsonl", "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(r.to_dict(), allow_nan=False) + "\n")
        s = summarize(results)
        s.update(
            n=geom.n,
            design=rep.to_dict(),
            analytic_detection_probability=analytic_detection_probability(params, rep.eta_det),
        )
        summaries.append(s)
        print(f"N={geom.n}: {s['successes']}/{s['runs']} succeeded, median trials {s['median_trials']}, "
              f"mean fidelity {s['mean_fidelity']}")
    _write_json(out / "summary.json", {**_header(cfg, "simulate"), "summaries": summaries})
    return EXIT_OK


def cmd_verify(cfg: RunConfig, sizes: Optional[Sequence[int]] = None, checks=None) -> int:
    checks = default_checks(DEFAULT_SIZES if sizes is None else sizes) if checks is None else checks
    results = run_checks(checks)
    sys.stdout.write(format_matrix(results))
    failed = [r.name for r in results if not r.ok]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "design":
            return cmd_design(cfg)
        if args.command == "pattern":
            return cmd_pattern(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_verify(cfg, sizes=args.n)
    except (QubitLimitError, GeometryError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DesignError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Command-line experiment driver.

Subcommands
-----------
solve           one mesh, one wave number; prints a summary line
convergence     refinement sweep per wave number; CSV + optional SVG
eigen-scan      fixed mesh, wave-number scan across the lowest eigenvalue,
                stabilized vs unstabilized; CSV + optional SVG
geometry-sweep  spheroid family and the polynomial isosurface; CSV + SVG

Exit codes: 0 success, 2 configuration error, 3 geometry error,
4 solver error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import fem, pipeline
from .errors import (
    DegenerateGradient,
    EmptyActiveSet,
    InvalidBox,
    NoCut,
    NotOnSurface,
    OutsideTubularNeighborhood,
    ProjectionDiverged,
    ResidualNotMet,
    SingularSystem,
    SurfhelmError,
)
from .geometry import PolyIsoline, Sphere, Spheroid, surface_from_json

EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_SOLVER = 4

_GEOMETRY_ERRORS = (DegenerateGradient, OutsideTubularNeighborhood,
                    ProjectionDiverged, NotOnSurface, InvalidBox,
                    EmptyActiveSet, NoCut)
_SOLVER_ERRORS = (SingularSystem, ResidualNotMet)

PRESETS = {
    "sphere": {"kind": "sphere", "center": [0, 0, 0], "radius": 0.5},
    "unit-sphere": {"kind": "sphere", "center": [0, 0, 0], "radius": 1.0},
    "spheroid-0.25": {"kind": "spheroid", "semi_axes": [0.5, 0.5, 0.25]},
    "spheroid-0.4": {"kind": "spheroid", "semi_axes": [0.5, 0.5, 0.4]},
    "spheroid-0.5": {"kind": "spheroid", "semi_axes": [0.5, 0.5, 0.5]},
    "poly": {"kind": "poly_isoline"},
}


class ConfigError(Exception):
    pass


def parse_surface(spec):
    if isinstance(spec, dict):
        cfg = spec
    elif spec.strip().startswith("{"):
        try:
            cfg = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad surface JSON: {exc}") from exc
    elif spec in PRESETS:
        cfg = PRESETS[spec]
    else:
        raise ConfigError(
            f"unknown surface preset {spec!r}; choose from {sorted(PRESETS)}")
    try:
        return surface_from_json(cfg)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad surface descriptor: {exc}") from exc


def parse_cells(spec):
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        values = [int(v) for v in spec]
    else:
        values = [int(v) for v in str(spec).split(",")]
    if any(v < 2 for v in values):
        raise ConfigError(f"cells-per-axis must be >= 2: {values}")
    if values != sorted(values) or len(set(values)) != len(values):
        raise ConfigError(f"refinement list must be strictly increasing: {values}")
    return values


def parse_k2(spec):
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    text = str(spec)
    if text.startswith("range:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError(f"range spec must be range:start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts[1:])
        if step <= 0:
            raise ConfigError(f"scan step must be positive, got {step}")
        count = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(count)]
    return [float(v) for v in text.split(",")]


def make_params(k2, args):
    if args.no_stabilization:
        return fem.StabilizationParams.unstabilized(np.sqrt(k2))
    return fem.StabilizationParams.default(np.sqrt(k2), args.gamma_s_im,
                                           args.gamma_j_im)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _k2_tag(k2):
    return f"{k2:g}".replace(".", "p")


def cmd_solve(args):
    surface = parse_surface(args.surface)
    cells = parse_cells(args.cells)
    k2_values = parse_k2(args.k2)
    if len(cells) != 1 or len(k2_values) != 1:
        raise ConfigError("solve takes a single cells value and a single k2")
    case = pipeline.build_geometry_case(surface, cells[0])
    res = pipeline.solve_case(case, make_params(k2_values[0], args))
    line = (f"surface={surface.kind} n={cells[0]} k2={res.k2:g} "
            f"ndof={res.ndof} h={res.h:.6g} residual={res.residual:.3e} "
            f"err_l2={res.err_l2:.6e} err_h1t={res.err_h1t:.6e} "
            f"err_energy={res.err_energy:.6e}")
    print(line)
    if args.out:
        out = _out_dir(args)
        (out / "solve_summary.txt").write_text(line + "\n")
    return 0


def cmd_convergence(args):
    surface = parse_surface(args.surface)
    cells = parse_cells(args.cells)
    k2_values = parse_k2(args.k2)
    if len(cells) < 3:
        raise ConfigError("convergence needs at least 3 refinement levels")
    if args.no_stabilization:
        records = pipeline.convergence_sweep(surface, cells, k2_values,
                                             gamma_s_im=0.0, gamma_j_im=0.0)
    else:
        records = pipeline.convergence_sweep(surface, cells, k2_values,
                                             gamma_s_im=args.gamma_s_im,
                                             gamma_j_im=args.gamma_j_im)
    out = _out_dir(args)
    for k2, rec in records.items():
        path = out / f"conv_{surface.kind}_k2_{_k2_tag(k2)}.csv"
        rec.write_csv(path)
        slopes = rec.fit_rates()
        print(f"k2={k2:g}: csv={path} slopes l2={slopes[0]:.3f} "
              f"h1t={slopes[1]:.3f} energy={slopes[2]:.3f}")
        if args.plot:
            plot_convergence_csv(path, path.with_suffix(".svg"))
    return 0


def cmd_eigen_scan(args):
    surface = parse_surface(args.surface)
    cells = parse_cells(args.cells)
    if len(cells) != 1:
        raise ConfigError("eigen-scan uses a single fixed mesh")
    k2_values = parse_k2(args.k2)
    if len(k2_values) < 2:
        raise ConfigError("eigen-scan needs a k2 range")
    case = pipeline.build_geometry_case(surface, cells[0])
    rows = []
    for k2 in k2_values:
        res_s = pipeline.solve_case(
            case, fem.StabilizationParams.default(np.sqrt(k2), args.gamma_s_im,
                                                  args.gamma_j_im))
        try:
            res_u = pipeline.solve_case(
                case, fem.StabilizationParams.unstabilized(np.sqrt(k2)))
            err_unstab = res_u.err_l2
        except _SOLVER_ERRORS:
            err_unstab = float("inf")
        rows.append((k2, res_s.err_l2, err_unstab))
    out = _out_dir(args)
    path = out / f"eigen_scan_{surface.kind}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k2", "err_stab", "err_unstab"])
        for k2, es, eu in rows:
            writer.writerow([f"{k2:.17g}", f"{es:.17g}", f"{eu:.17g}"])
    print(f"eigen scan: csv={path} ({len(rows)} points)")
    if args.plot:
        plot_eigen_csv(path, path.with_suffix(".svg"))
    return 0


def cmd_geometry_sweep(args):
    cells = parse_cells(args.cells)
    poly_cells = parse_cells(args.poly_cells)
    k2 = parse_k2(args.k2)
    out = _out_dir(args)
    sweeps = [Spheroid(semi_axes=(0.5, 0.5, rmin))
              for rmin in (0.25, 0.4, 0.5)]
    for surface in sweeps:
        rmin = surface.semi_axes[2]
        records = pipeline.convergence_sweep(surface, cells, k2,
                                             gamma_s_im=args.gamma_s_im,
                                             gamma_j_im=args.gamma_j_im)
        for k2v, rec in records.items():
            path = out / f"conv_spheroid_rmin_{_k2_tag(rmin)}_k2_{_k2_tag(k2v)}.csv"
            rec.write_csv(path)
            slopes = rec.fit_rates()
            print(f"spheroid rmin={rmin:g} k2={k2v:g}: l2 slope {slopes[0]:.3f}")
            if args.plot:
                plot_convergence_csv(path, path.with_suffix(".svg"))
    poly = PolyIsoline()
    records = pipeline.convergence_sweep(poly, poly_cells, k2,
                                         gamma_s_im=args.gamma_s_im,
                                         gamma_j_im=args.gamma_j_im)
    for k2v, rec in records.items():
        path = out / f"conv_poly_k2_{_k2_tag(k2v)}.csv"
        rec.write_csv(path)
        slopes = rec.fit_rates()
        print(f"poly isosurface k2={k2v:g}: l2 slope {slopes[0]:.3f}")
        if args.plot:
            plot_convergence_csv(path, path.with_suffix(".svg"))
    return 0


def plot_convergence_csv(csv_path, svg_path):
    """Log-log error plot with a 2:1 reference line, built from CSV only."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    h, l2, h1t = [], [], []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            h.append(float(row["h"]))
            l2.append(float(row["err_l2"]))
            h1t.append(float(row["err_h1t"]))
    h = np.array(h)
    fig, ax = plt.subplots()
    ax.loglog(h, l2, "o-", label="L2 error")
    ax.loglog(h, h1t, "s-", label="tangential H1 error")
    ref = l2[0] * (h / h[0]) ** 2
    ax.loglog(h, ref, "k:", label="2:1 reference")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


def plot_eigen_csv(csv_path, svg_path, cap_factor=1e3):
    """Scan plot; unstabilized errors capped at cap_factor times the
    stabilized error at the first scan point (raw values stay in the CSV)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    k2, es, eu = [], [], []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            k2.append(float(row["k2"]))
            es.append(float(row["err_stab"]))
            eu.append(float(row["err_unstab"]))
    cap = cap_factor * es[0]
    eu_capped = [min(v, cap) for v in eu]
    fig, ax = plt.subplots()
    ax.semilogy(k2, es, "o-", label="stabilized")
    ax.semilogy(k2, eu_capped, "s-", label="unstabilized (capped)")
    ax.set_xlabel("k^2")
    ax.set_ylabel("L2 error")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="surfhelm",
        description="Stabilized cut FEM solver for the Helmholtz-Beltrami "
                    "equation on implicit surfaces")
    parser.add_argument("--config", help="JSON file with argument defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--surface", default="sphere",
                       help="preset name or inline JSON descriptor")
        p.add_argument("--cells", default="16",
                       help="cells per axis, single value or comma list")
        p.add_argument("--k2", default="1",
                       help="wave number squared: value, comma list, or "
                            "range:start:stop:step")
        p.add_argument("--gamma-s-im", type=float, default=1.0)
        p.add_argument("--gamma-j-im", type=float, default=1e-3)
        p.add_argument("--no-stabilization", action="store_true")
        p.add_argument("--out", default="out")
        p.add_argument("--plot", action="store_true")

    p = sub.add_parser("solve", help="single solve")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="refinement sweep")
    common(p)
    p.set_defaults(func=cmd_convergence, cells="8,16,32")

    p = sub.add_parser("eigen-scan", help="wave-number scan near the lowest "
                                          "eigenvalue")
    common(p)
    p.set_defaults(func=cmd_eigen_scan, surface="unit-sphere",
                   k2="range:1.5:2.5:0.025")

    p = sub.add_parser("geometry-sweep", help="spheroid family and the "
                                              "polynomial isosurface")
    common(p)
    p.add_argument("--poly-cells", default="24,36,48",
                   help="refinements for the polynomial isosurface")
    p.set_defaults(func=cmd_geometry_sweep, cells="8,16,32")

    return parser


def _apply_config_file(parser, argv):
    """Load --config JSON as argument defaults; CLI flags still override."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    extra = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                extra.append(flag)
        elif isinstance(value, (list, tuple)):
            extra.append(f"{flag}={','.join(str(v) for v in value)}")
        elif isinstance(value, dict):
            extra.append(f"{flag}={json.dumps(value)}")
        else:
            extra.append(f"{flag}={value}")
    # insert config-derived args right after the subcommand so explicit
    # flags, which come later, take precedence
    for i, arg in enumerate(argv):
        if not arg.startswith("-") and arg != known.config:
            return argv[:i + 1] + extra + argv[i + 1:]
    return argv + extra


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _GEOMETRY_ERRORS as exc:
        print(f"geometry error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except _SOLVER_ERRORS as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``bvtomo mesh|synth|forward|invert|report``.

Every subcommand accepts ``--config FILE`` with flat ``key = value`` lines.
Keys naming a command-line option set its default (flags given on the
command line still win); keys naming a :class:`ReconConfig` field override
the reconstruction settings. ``BVTOMO_SEED`` is the fallback noise seed.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__, fem, io
from .functional import ReconConfig
from .mesh import MeshError, generate_disc_mesh, load_triangle_format
from .recon import bv_reconstruct, physical_reconstruct
from .synthetic import (EXACT, GEOMETRIES, TIKHONOV, NoiseSpec, add_noise, build_alpha0,
                        build_omega0, exact_xy, make_dataset)

log = logging.getLogger("bvtomo")
RECON_FIELDS = {f.name: f for f in fields(ReconConfig) if f.name != "alpha_ref"}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{source} line {lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(name: str, text: str):
    f = RECON_FIELDS[name]
    kind = str(f.type)
    if text.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("bool"):
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise UsageError(f"invalid value {text!r} for {name}") from None
    return text


def recon_overrides(pairs: dict[str, str]) -> dict:
    unknown = sorted(set(pairs) - set(RECON_FIELDS))
    if unknown:
        raise UsageError(f"unknown setting(s): {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in pairs.items()}


def _seed_default() -> int:
    env = os.environ.get("BVTOMO_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"BVTOMO_SEED must be an integer, got {env!r}") from None


# ------------------------------------------------------------------ helpers

def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _nonnegative(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return v


def _load_mesh(args, delta: float):
    if getattr(args, "mesh", None):
        return io.read_mesh(args.mesh, delta=delta)
    return generate_disc_mesh(2.0, args.h, delta=delta)


def _summary(msg: str) -> None:
    print(msg, flush=True)


# ------------------------------------------------------------------ commands

def cmd_mesh(args) -> int:
    if args.load:
        node_path, ele_path = map(Path, args.load)
        try:
            mesh = load_triangle_format(node_path.read_text(), ele_path.read_text(), delta=args.delta)
        except OSError as exc:
            raise UsageError(f"{exc.filename}: {exc.strerror}") from None
    else:
        mesh = generate_disc_mesh(args.radius, args.h, delta=args.delta)
    io.write_mesh(mesh, args.out)
    _summary(f"mesh: {mesh.n_nodes} nodes, {mesh.n_triangles} elements, h={mesh.h:.4f} -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    mesh = _load_mesh(args, 0.0)
    data = make_dataset(mesh, args.geometry, args.pairs)
    noise = NoiseSpec(args.theta, args.seed)
    data = add_noise(data, noise)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_boundary_data(out / "boundary_data.csv", data)
    io.write_manifest(out / "manifest.json", {
        "command": "synth", "version": __version__, "geometry": args.geometry, "pairs": args.pairs,
        "theta": args.theta, "seed": args.seed, "mesh": mesh.fingerprint(),
    })
    _summary(f"synth: {args.geometry}, N={args.pairs}, theta={args.theta}, seed={args.seed} -> {out}")
    return 0


def cmd_forward(args) -> int:
    mesh = _load_mesh(args, 0.0)
    inclusion = GEOMETRIES[args.geometry]
    if args.alpha == "exact":
        alpha = inclusion.conductivity(mesh.centroids).astype(float)
    elif args.alpha == "one":
        alpha = np.ones(mesh.n_triangles)
    else:
        alpha = io.read_nodal(args.alpha)
    data = io.read_boundary_data(args.data) if args.data else make_dataset(mesh, args.geometry, 1)
    if len(data.angles) != len(mesh.boundary_nodes):
        raise UsageError("boundary data does not match the mesh boundary")
    for g in data.g:
        fem.check_compatible(mesh, g)
    u = fem.solve_dirichlet(mesh, alpha, data.f[0])
    w = fem.solve_neumann(mesh, alpha, data.g[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_nodal(out / "u.csv", "u", u)
    io.write_nodal(out / "w.csv", "w", w)
    cell = {"alpha": alpha} if len(alpha) == mesh.n_triangles else {}
    point = {"u": u, "w": w} | ({"alpha": alpha} if len(alpha) == mesh.n_nodes else {})
    io.write_vtk(out / "forward.vtk", mesh, point, cell, title=f"forward {args.geometry}")
    report = {"command": "forward", "geometry": args.geometry, "alpha": args.alpha,
              "mesh": mesh.fingerprint(), "h": mesh.h}
    if args.alpha == "exact" and not args.data and args.geometry in EXACT:
        exact = exact_xy(args.geometry)
        report["l2_error_u"] = fem.l2_error(mesh, u, exact)
        report["h1_error_u"] = fem.h1_seminorm_error(mesh, u, exact)
        _summary(f"forward: h={mesh.h:.4f} L2 error {report['l2_error_u']:.3e}, "
                 f"H1 seminorm error {report['h1_error_u']:.3e}")
    io.write_manifest(out / "manifest.json", report)
    _summary(f"forward: fields written to {out}")
    return 0


def _experiment_grid(args) -> list[dict]:
    grid = []
    ells = [TIKHONOV] if args.tikhonov else args.ell
    for ell, mu, n, theta in itertools.product(ells, args.mu, args.pairs, args.theta):
        grid.append({"geometry": args.geometry, "ell": ell, "mu": mu, "pairs": n, "theta": theta})
    return grid


def _run_name(spec: dict) -> str:
    ell = "tikhonov" if np.isinf(spec["ell"]) else f"ell{spec['ell']:g}"
    return f"{spec['geometry']}_{ell}_mu{spec['mu']:g}_N{spec['pairs']}_theta{spec['theta']:g}"


def run_experiment(spec: dict, settings: dict, mesh_args: dict, physical: bool, alpha0_mode: str | None,
                   seed: int, out: str) -> dict:
    """One reconstruction with its outputs written under ``out``."""
    cfg = ReconConfig(**{**settings, "mu": spec["mu"], "rng_seed": seed})
    if mesh_args.get("mesh"):
        mesh = io.read_mesh(mesh_args["mesh"], delta=cfg.delta)
    else:
        mesh = generate_disc_mesh(2.0, mesh_args["h"], delta=cfg.delta)
    inclusion = GEOMETRIES[spec["geometry"]]
    data = add_noise(make_dataset(mesh, spec["geometry"], spec["pairs"]), NoiseSpec(spec["theta"], seed))
    if physical:
        ell = 0.02 if not np.isinf(spec["ell"]) else TIKHONOV
        result = physical_reconstruct(mesh, data, cfg, inclusion, ell=ell, tikhonov=np.isinf(spec["ell"]))
    else:
        mode = alpha0_mode or ("constant" if spec["geometry"] == "strong_eccentric" or spec["pairs"] > 1
                               else "banded")
        ell0 = 0.0 if np.isinf(spec["ell"]) else spec["ell"]
        omega0 = build_omega0(mesh, inclusion, spec["ell"])
        alpha0 = build_alpha0(mesh, mode, inclusion, ell0, b=cfg.b)
        result = bv_reconstruct(mesh, data, cfg, omega0, alpha0, inclusion=inclusion)
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    io.write_nodal(d / "alpha.csv", "alpha", result.alpha)
    io.write_csv(d / "omega.csv", ["element", "omega"], enumerate(result.omega))
    io.write_history(d / "history.csv", result.history)
    io.write_vtk(d / "fields.vtk", mesh, {"alpha": result.alpha, "u": result.u[0] + fem.extend_trace(mesh, data.f[0])},
                 {"omega": result.omega}, title=_run_name(spec))
    io.write_manifest(d / "manifest.json", {
        "command": "invert", "version": __version__, "experiment": spec | {"ell": str(spec["ell"])},
        "physical": physical, "alpha0": "three_valued" if physical else mode, "seed": seed,
        "config": cfg.to_dict(), "mesh": {"fingerprint": mesh.fingerprint(), **mesh_args,
                                          "nodes": mesh.n_nodes, "elements": mesh.n_triangles},
    })
    last = result.history[-1]
    return {"name": d.name, "alpha_in": last.alpha_in, "alpha_out": last.alpha_out, "J": last.J}


def cmd_invert(args) -> int:
    settings = recon_overrides({**args.recon_settings, **parse_set_pairs(args.set)})
    # mu comes from the grid
    settings.pop("mu", None)
    ReconConfig(**settings)  # validate once up front
    grid = _experiment_grid(args)
    mesh_args = {"mesh": args.mesh} if args.mesh else {"h": args.h}
    out = Path(args.out)
    dirs = [str(out)] if len(grid) == 1 else [str(out / _run_name(s)) for s in grid]
    jobs = [(s, settings, mesh_args, args.physical, args.alpha0, args.seed, d) for s, d in zip(grid, dirs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_experiment, *zip(*jobs)))
    else:
        results = [run_experiment(*j) for j in jobs]
    for r in results:
        _summary(f"invert: {r['name']} alpha_in={r['alpha_in']} alpha_out={r['alpha_out']} J={r['J']:.6g}")
    return 0


def parse_set_pairs(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_report(root) -> tuple[str, list[str]]:
    """Markdown table of every ``history.csv`` below ``root``; also returns problems found."""
    root = Path(root)
    if not root.is_dir():
        raise UsageError(f"{root}: not a directory")
    paths = sorted(root.rglob("history.csv"))
    if not paths:
        raise UsageError(f"{root}: no runs found (expected <run>/history.csv with manifest.json)")
    lines = ["| run | geometry | ell | mu | N | theta | n | alpha_in | alpha_out | J |",
             "|---|---|---|---|---|---|---|---|---|---|"]
    problems = []
    for p in paths:
        manifest = p.parent / "manifest.json"
        if not manifest.exists():
            problems.append(f"{p.parent}: missing manifest.json")
            continue
        exp = json.loads(manifest.read_text())["experiment"]
        for row in io.read_history(p):
            lines.append(f"| {p.parent.relative_to(root) if p.parent != root else '.'} | {exp['geometry']} | "
                         f"{exp['ell']} | {exp['mu']} | {exp['pairs']} | {exp['theta']} | {row['n']} | "
                         f"{row['alpha_in']} | {row['alpha_out']} | {float(row['J']):.6g} |")
    return "\n".join(lines) + "\n", problems


def cmd_report(args) -> int:
    text, problems = build_report(args.directory)
    for p in problems:
        print(f"warning: {p}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bvtomo", description="BV-regularized conductivity reconstruction")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log inner iterations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mesh_source=True):
        p.add_argument("--config", help="key = value settings file")
        if mesh_source:
            p.add_argument("--mesh", help="directory holding nodes.csv and elements.csv")
            p.add_argument("--h", type=_positive, default=0.27, help="target mesh size for a generated disc")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("mesh", help="generate or convert a mesh")
    common(p, mesh_source=False)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--disc", action="store_true", help="generate a disc mesh (default)")
    src.add_argument("--load", nargs=2, metavar=("NODE", "ELE"), help="Triangle .node and .ele files")
    p.add_argument("--h", type=_positive, default=0.27)
    p.add_argument("--radius", type=_positive, default=2.0)
    p.add_argument("--delta", type=_nonnegative, default=0.0)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("synth", help="write boundary data for a test geometry")
    common(p)
    p.add_argument("--geometry", choices=sorted(GEOMETRIES), default="concentric")
    p.add_argument("--pairs", type=int, default=1)
    p.add_argument("--theta", type=_nonnegative, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("forward", help="solve the direct problems for a given conductivity")
    common(p)
    p.add_argument("--geometry", choices=sorted(GEOMETRIES), default="concentric")
    p.add_argument("--alpha", default="exact", help="'exact', 'one' or a nodal alpha.csv")
    p.add_argument("--data", help="boundary_data.csv (defaults to the geometry's exact data)")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("invert", help="run the BV reconstruction")
    common(p)
    p.add_argument("--geometry", choices=sorted(GEOMETRIES), default="concentric")
    ring = p.add_mutually_exclusive_group()
    ring.add_argument("--ell", type=_nonnegative, nargs="+", default=[0.2], help="prior ring width(s)")
    ring.add_argument("--tikhonov", action="store_true", help="constant initial weight")
    p.add_argument("--mu", type=_nonnegative, nargs="+", default=[1.0])
    p.add_argument("--pairs", type=int, nargs="+", default=[1])
    p.add_argument("--theta", type=_nonnegative, nargs="+", default=[0.0])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--physical", action="store_true", help="single iteration with the exact interface prior")
    p.add_argument("--alpha0", choices=["banded", "constant"], default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="reconstruction setting override")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs for a parameter grid")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("report", help="tabulate history.csv files of a sweep")
    p.add_argument("directory")
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(func=cmd_report, config=None)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    args.recon_settings = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            pairs = parse_config_text(path.read_text(encoding="utf-8"), str(path))
        except OSError as exc:
            raise UsageError(f"{path}: {exc.strerror}") from None
        sub = parser._subparsers._group_actions[0].choices[args.command]
        dests = {a.dest: a for a in sub._actions}
        cli_defaults, recon = {}, {}
        for key, value in pairs.items():
            if key in dests and key not in ("config", "func"):
                action = dests[key]
                tokens = value.split() if action.nargs in ("+", "*") else [value]
                if action.option_strings and action.nargs == 0:
                    cli_defaults[key] = value.lower() in ("true", "1", "yes")
                else:
                    conv = action.type or str
                    try:
                        vals = [conv(t) for t in tokens]
                    except (argparse.ArgumentTypeError, ValueError) as exc:
                        raise UsageError(f"{path}: bad value for {key}: {exc}") from None
                    cli_defaults[key] = vals if action.nargs in ("+", "*") else vals[0]
            else:
                recon[key] = value
        sub.set_defaults(**cli_defaults)
        args = parser.parse_args(argv)
        args.recon_settings = recon
    if getattr(args, "seed", 0) is None:
        args.seed = _seed_default()
    if getattr(args, "pairs", None) is not None:
        pairs = args.pairs if isinstance(args.pairs, list) else [args.pairs]
        if any(n < 1 for n in pairs):
            raise UsageError("--pairs must be at least 1")
    if getattr(args, "jobs", 1) < 1:
        raise UsageError("--jobs must be at least 1")
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.command != "invert" and args.recon_settings:
            raise UsageError(f"unknown setting(s): {', '.join(sorted(args.recon_settings))}")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bvtomo: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bvtomo {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (MeshError, ValueError, OSError, RuntimeError) as exc:
        print(f"bvtomo {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: field computation, verification sweeps and
figure-data regeneration.

Exit codes: 0 success, 1 failed verification check, 2 configuration
error, 3 numerical failure (all nodes masked).  Every report is a single
JSON line on stdout.  FTME_THREADS caps internal worker counts; it only
affects speed, never results (the current implementation is sequential).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (LinearSystem, ParabolaSystem, integrate_flow,
                       linear_saddle)
from .entropy import (TimeSet, ftme_2d_exact, ftme_monte_carlo,
                      gamma_norm_deviation, pesin_gap)
from .fieldio import Grid2D, export_csv, export_pgm
from .lcs import cone_check, ftle_field, stretching_rate_field, weighted_ftme_field

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _parse_grid(spec: str) -> Grid2D:
    """Grid syntax xmin:xmax:ymin:ymax:NXxNY, e.g. -2:2:-2:2:101x101."""
    parts = spec.split(":")
    if len(parts) != 5 or "x" not in parts[4]:
        raise ConfigError(f"bad grid spec {spec!r}")
    try:
        x_min, x_max, y_min, y_max = (float(p) for p in parts[:4])
        nx_s, ny_s = parts[4].split("x")
        nx, ny = int(nx_s), int(ny_s)
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {spec!r}: {exc}") from exc
    try:
        return Grid2D(x_min=x_min, x_max=x_max, y_min=y_min, y_max=y_max,
                      nx=nx, ny=ny)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _make_system(args):
    name = args.system
    if name == "linear-saddle":
        return linear_saddle()
    if name == "parabola":
        try:
            return ParabolaSystem(beta=args.beta, gamma=args.gamma)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if name == "linear":
        if args.A is None:
            raise ConfigError("--A a11,a12,a21,a22 required for --system linear")
        try:
            vals = [float(v) for v in args.A.split(",")]
            A = np.array(vals).reshape(2, 2)
        except ValueError as exc:
            raise ConfigError(f"bad --A: {exc}") from exc
        return LinearSystem(A)
    raise ConfigError(f"unknown system {name!r}")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_field(args) -> int:
    if not args.T > 0:
        raise ConfigError("T must be positive")
    if args.steps_per_unit <= 0:
        raise ConfigError("steps-per-unit must be positive")
    system = _make_system(args)
    grid = _parse_grid(args.grid)
    field = system.field()
    steps = max(1, round(args.T * args.steps_per_unit))
    if args.kind == "ftme-weighted":
        out = weighted_ftme_field(field, grid, args.T, steps)
    elif args.kind == "ftle-forward":
        out = ftle_field(field, grid, args.T, steps, "forward")
    elif args.kind == "ftle-backward":
        out = ftle_field(field, grid, args.T, steps, "backward")
    elif args.kind == "stretching-rate":
        out = stretching_rate_field(field, grid, args.T, steps)
    else:
        raise ConfigError(f"unknown field kind {args.kind!r}")
    valid = int(out.mask.sum())
    if valid == 0:
        print("all nodes masked", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.csv:
        export_csv(out, args.csv)
    if args.pgm:
        export_pgm(out, args.pgm)
    _emit({"kind": args.kind, "min": out.valid_min(), "max": out.valid_max(),
           "valid": valid, "nodes": grid.nx * grid.ny})
    return EXIT_OK


def _verify_pesin(args) -> bool:
    gen = np.random.Generator(np.random.Philox(key=args.seed))
    failures = 0
    for _ in range(args.draws):
        lam = np.sort(gen.uniform(-2.0, 2.0, 2))[::-1]
        alpha = gen.uniform(-1.0, 1.0)
        T = gen.uniform(0.5, 4.0)
        h = ftme_2d_exact(lam[0], lam[1], alpha, T).h
        _, _, ok = pesin_gap(lam, alpha, h, 2, T)
        if not ok:
            failures += 1
    ok = failures == 0
    _emit({"check": "pesin", "draws": args.draws, "failures": failures,
           "pass": ok})
    return ok


def _verify_mc(args) -> bool:
    T = 1.0
    lam1 = math.log(args.kappa1) / T
    lam2 = math.log(args.kappa2) / T
    exact = ftme_2d_exact(lam1, lam2, 0.0, T).h
    J = TimeSet(t0=0.0, times=(0.0, T))
    phi = np.diag([args.kappa1, args.kappa2])
    mc = ftme_monte_carlo([(0.0, np.eye(2)), (T, phi)], 0.0, J,
                          args.samples, args.seed)
    ok = abs(mc.h - exact) <= 3.0 * mc.stderr
    _emit({"check": "mc", "exact": exact, "mc": mc.h, "stderr": mc.stderr,
           "pass": ok})
    return ok


def _verify_gamma(args) -> bool:
    gen = np.random.Generator(np.random.Philox(key=args.seed))
    J = TimeSet(t0=0.0, times=(0.0, 1.0))
    phi = np.diag([2.0, 0.5])
    mats = [(0.0, np.eye(2)), (1.0, phi)]
    base = ftme_monte_carlo(mats, 0.0, J, args.samples, args.seed)
    failures = 0
    for k in range(args.draws):
        d = gen.uniform(0.5, 2.0, 2)
        Gamma = np.diag(d)
        bound = gamma_norm_deviation(Gamma, 2, J.length)
        hg = ftme_monte_carlo(mats, 0.0, J, args.samples, args.seed + 1 + k,
                              gamma=Gamma)
        tol = 4.0 * math.hypot(base.stderr, hg.stderr)
        if abs(hg.h - base.h) > bound + tol:
            failures += 1
    ok = failures == 0
    _emit({"check": "gamma", "draws": args.draws, "failures": failures,
           "pass": ok})
    return ok


def _verify_cones(args) -> bool:
    system = _make_system(args)
    field = system.field()
    eps, T, delta = args.eps, args.T, args.delta
    if isinstance(system, LinearSystem):
        lam1, lam2 = 1.0, -1.0
        e1 = np.array([1.0, 0.0])
        e2 = np.array([1.0, 2.0]) / math.sqrt(5.0)
        on_ws = lambda s: np.array([s, 2.0 * s])
        on_wu = lambda s: np.array([s, 0.0])
    elif isinstance(system, ParabolaSystem):
        lam1, lam2 = system.gamma, -1.0
        e1 = np.array([0.0, 1.0])
        e2 = np.array([1.0, 0.0])
        c = system.beta / (2.0 + system.gamma)
        on_ws = lambda s: np.array([s, -c * s * s])
        on_wu = lambda s: np.array([0.0, s])
    else:
        raise ConfigError("cones check supports linear-saddle and parabola")
    xstar = np.zeros(2)
    steps = max(1, round(T * args.steps_per_unit))
    ss = np.linspace(-delta * 0.9, delta * 0.9, 21)
    ss = ss[np.abs(ss) > 1e-3 * delta]
    pts_u = [on_wu(s) for s in ss]
    pts_s = [on_ws(s) for s in ss]
    gen = np.random.Generator(np.random.Philox(key=args.seed))
    ball = gen.normal(size=(50, 2))
    ball = ball / np.linalg.norm(ball, axis=1)[:, None]
    ball *= delta * gen.uniform(0.05, 1.0, 50)[:, None]
    failures = []
    reports = cone_check(field, xstar, e1, e2, lam1, lam2, eps, T, delta,
                         pts_u + pts_s + list(ball), steps)
    nu = len(pts_u)
    ns = len(pts_s)
    for idx, r in enumerate(reports):
        # bound (i) holds for every sampled point; the cone statements are
        # checked through their conclusions, since a point reported inside
        # a cone must carry the corresponding H value
        if not 0.0 <= r.H < lam1 - lam2 + eps:
            failures.append(("bound", idx))
        if r.membership == "unstable_cone" and r.H >= eps:
            failures.append(("unstable", idx))
        if r.membership == "stable_cone" and r.H <= lam1 - eps:
            failures.append(("stable", idx))
        if idx < nu and r.H >= eps:
            failures.append(("wu_small", idx))
        if nu <= idx < nu + ns:
            if not (lam1 - lam2 - eps < r.H < lam1 - lam2 + eps):
                failures.append(("ws_band", idx))
    ok = not failures
    _emit({"check": "cones", "system": args.system, "points": len(reports),
           "failures": len(failures), "pass": ok})
    return ok


def cmd_verify(args) -> int:
    checks = {"pesin": _verify_pesin, "mc": _verify_mc,
              "gamma": _verify_gamma, "cones": _verify_cones}
    names = list(checks) if args.check == "all" else [args.check]
    ok = all(checks[name](args) for name in names)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_figures(args) -> int:
    if not args.T > 0:
        raise ConfigError("T must be positive")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = Grid2D(x_min=-2.0, x_max=2.0, y_min=-2.0, y_max=2.0,
                  nx=args.grid_size, ny=args.grid_size)
    steps = max(1, round(args.T * args.steps_per_unit))
    systems = {"linear-saddle": linear_saddle(),
               "parabola": ParabolaSystem(beta=1.0, gamma=1.0)}
    manifest = {"version": __version__, "T": args.T, "seed": args.seed,
                "grid": f"-2:2:-2:2:{args.grid_size}x{args.grid_size}",
                "steps_per_unit": args.steps_per_unit, "outputs": []}
    for sys_name, system in systems.items():
        field = system.field()
        outputs = {
            "ftme-weighted": weighted_ftme_field(field, grid, args.T, steps),
            "ftle-forward": ftle_field(field, grid, args.T, steps, "forward"),
            "ftle-backward": ftle_field(field, grid, args.T, steps, "backward"),
        }
        for kind, sf in outputs.items():
            stem = f"{sys_name}_{kind}"
            export_csv(sf, outdir / f"{stem}.csv")
            export_pgm(sf, outdir / f"{stem}.pgm")
            manifest["outputs"].append({
                "system": sys_name, "kind": kind,
                "csv": f"{stem}.csv", "pgm": f"{stem}.pgm",
                "min": sf.valid_min(), "max": sf.valid_max(),
            })
    with open(outdir / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit({"command": "figures", "out": str(outdir),
           "files": len(manifest["outputs"]) * 2 + 1})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftme",
        description="Finite-time metric entropy and FTLE field computation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_system_args(p):
        p.add_argument("--system", default="linear-saddle",
                       choices=["linear-saddle", "parabola", "linear"])
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--gamma", type=float, default=1.0)
        p.add_argument("--A", default=None,
                       help="comma-separated 2x2 matrix for --system linear")

    p_field = sub.add_parser("field", help="compute a scalar field on a grid")
    add_system_args(p_field)
    p_field.add_argument("--kind", required=True,
                         choices=["ftme-weighted", "ftle-forward",
                                  "ftle-backward", "stretching-rate"])
    p_field.add_argument("--grid", default="-2:2:-2:2:101x101")
    p_field.add_argument("--T", type=float, default=2.0)
    p_field.add_argument("--steps-per-unit", type=float, default=100.0)
    p_field.add_argument("--csv", default=None)
    p_field.add_argument("--pgm", default=None)
    p_field.set_defaults(func=cmd_field)

    p_verify = sub.add_parser("verify", help="run verification sweeps")
    p_verify.add_argument("check",
                          choices=["pesin", "mc", "gamma", "cones", "all"])
    add_system_args(p_verify)
    p_verify.add_argument("--draws", type=int, default=200)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--samples", type=int, default=1_000_000)
    p_verify.add_argument("--kappa1", type=float, default=2.0)
    p_verify.add_argument("--kappa2", type=float, default=0.5)
    p_verify.add_argument("--eps", type=float, default=0.25)
    p_verify.add_argument("--T", type=float, default=8.0)
    p_verify.add_argument("--delta", type=float, default=0.05)
    p_verify.add_argument("--steps-per-unit", type=float, default=100.0)
    p_verify.set_defaults(func=cmd_verify)

    p_fig = sub.add_parser("figures", help="regenerate figure data files")
    p_fig.add_argument("--out", default="figures-data")
    p_fig.add_argument("--T", type=float, default=2.0)
    p_fig.add_argument("--grid-size", type=int, default=201)
    p_fig.add_argument("--steps-per-unit", type=float, default=100.0)
    p_fig.add_argument("--seed", type=int, default=0)
    p_fig.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    threads = os.environ.get("FTME_THREADS")
    if threads is not None:
        try:
            if int(threads) < 1:
                raise ValueError
        except ValueError:
            print(f"invalid FTME_THREADS={threads!r}", file=sys.stderr)
            return EXIT_CONFIG
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

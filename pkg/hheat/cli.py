"""Command-line front end.

    hheat kernel [value|table|list] ...
    hheat evolve --config run.json --out DIR
    hheat sweep --config run.json --out DIR
    hheat check-condition --p 2 --n 1
    hheat montecarlo --n 1 --t 1.0 --paths 1000000 --seed 7 --out density.hhf
    hheat verify --out report.json

Every command writes CSV with a header row and ``repr`` floats, so reruns with
the same config and seed give byte-identical files. ``HHEAT_CACHE_DIR`` selects
the kernel cache directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .asymptotics import condition_check, dichotomy_sweep, profile_convergence
from .config import RunConfig, config_from_dict, load_config
from .digest import hash_array
from .errors import ConfigError, HeatError, UsageError
from .field import GridSpec
from .heatkernel import CONVENTIONS, kernel_value, tabulate_kernel
from .hgroup import HPoint
from .montecarlo import McConfig, compare_with_kernel, estimate_density, sample_paths
from .solver import AbsorptionProfile, evolve, mass_identity_residual
from .storage import KernelCache, write_field
from .verify import run_verify

logger = logging.getLogger("hheat")

# k = 1, small bump on the wide box, T_end = 20
DICHOTOMY_PRESET: dict[str, Any] = {
    "grid": "wide",
    "solver": {"p": 2.5, "dt": 1.0, "t_end": 20.0, "snapshot_every": 2},
    "initial": {"kind": "bump", "amplitude": 0.01, "radius": 6.0},
}
EVOLVE_PRESET: dict[str, Any] = {"solver": {"p": 2.5}}


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)


def _dump(data: dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _run_config(args: argparse.Namespace, preset: dict[str, Any]) -> RunConfig:
    """Load ``--config`` (or the preset) and apply ``--seed`` / ``--workers``."""
    if args.config:
        data = load_config(args.config).to_dict()
    else:
        data = json.loads(json.dumps(preset))
    if args.seed is not None:
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    return config_from_dict(data)


def _out_dir(args: argparse.Namespace, cfg: RunConfig | None = None) -> Path:
    out = Path(args.out) if args.out else (cfg.output_dir if cfg else Path("out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_or_none(args: argparse.Namespace) -> RunConfig | None:
    """``--config`` with ``--seed`` / ``--workers`` applied, or None without one."""
    return _run_config(args, {}) if args.config else None


def _grid_for(args: argparse.Namespace, cfg: RunConfig | None, n: int) -> GridSpec:
    """``--grid`` preset, else the config's grid, else the default preset."""
    if args.grid:
        return getattr(GridSpec, args.grid)(n)
    if cfg is not None:
        return cfg.grid
    return GridSpec.default(n)


# -- commands -----------------------------------------------------------------


def cmd_kernel(args: argparse.Namespace) -> int:
    cfg = _config_or_none(args)
    workers = args.workers or (cfg.workers if cfg else 1)
    params = cfg.quadrature if cfg else None
    n = args.n if args.n is not None else (cfg.n if cfg else 1)
    if args.action == "list":
        for entry in KernelCache().list_tables():
            print(f"{entry['key']}  n={entry['n']}  shape={entry['shape']}  {entry['path']}")
        return 0
    if args.action == "table":
        table = tabulate_kernel(n, _grid_for(args, cfg, n), params, cache=KernelCache(), workers=workers)
        if args.out:
            write_field(args.out, table.values, extra={"key": table.key, "kernel": table.header()})
        summary = {"key": table.key, "checks": [c.to_dict() for c in table.checks()]}
        sys.stdout.write(_dump(summary))
        return 0
    point = HPoint.parse(args.point) if args.point else HPoint.origin(n)
    value = kernel_value(point.n, args.t, point, params=params, convention=args.convention)
    print(repr(value))
    return 0


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = _run_config(args, EVOLVE_PRESET)
    out = _out_dir(args, cfg)
    u0 = cfg.solver.initial.sample(cfg.grid, cfg.quadrature)
    result = evolve(u0, cfg.solver, cfg.absorption, cfg.workers)
    result.trace.write_csv(out / "trace.csv")
    write_field(out / "final.hhf", result.final, extra={"t": result.trace.final.t})
    for i, (t, u) in enumerate(result.snapshots):
        write_field(out / f"snapshot_{i:04d}.hhf", u, extra={"t": t})
    ok, broken = result.trace.verify()
    summary = {
        "config": cfg.to_dict(),
        "final": result.trace.final.to_dict(),
        "mass_identity_residual": mass_identity_residual(result.trace),
        "trace_valid": ok,
        "trace_break": broken,
        "final_digest": hash_array(result.final.values),
    }
    (out / "summary.json").write_text(_dump(summary), encoding="utf-8")
    print(f"evolve: M(0)={result.trace.initial_mass!r} M(T)={result.trace.final.mass!r} -> {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _run_config(args, DICHOTOMY_PRESET)
    out = _out_dir(args, cfg)
    keep = cfg.solver.snapshot_every > 0
    result = dichotomy_sweep(cfg.sweep_p, cfg.solver, cfg.absorption, cfg.workers, cfg.sweep_jobs, keep)
    (out / "sweep.csv").write_text(result.to_csv(), encoding="utf-8")
    for row in result.rows:
        row.trace.write_csv(out / f"trace_p{row.p:g}.csv")
    profiles = {}
    for p, run in sorted(result.results.items()):
        if p <= result.critical or len(run.snapshots) < 2:
            continue
        for q in (1.0, 2.0):
            series = profile_convergence(run, q, workers=cfg.workers)
            lines = ["t,value,relative"]
            lines += [f"{t!r},{v!r},{r!r}" for t, v, r in zip(series.times, series.values, series.relative)]
            (out / f"profile_p{p:g}_q{q:g}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
            profiles[f"p={p:g},q={q:g}"] = series.decreasing_tail()
    summary = {
        "config": cfg.to_dict(),
        "critical_exponent": result.critical,
        "rows": [r.to_dict() for r in sorted(result.rows, key=lambda r: r.p)],
        "plateau_ordering": result.plateau_ordering(),
        "profile_decreasing": profiles,
    }
    (out / "summary.json").write_text(_dump(summary), encoding="utf-8")
    sys.stdout.write(result.to_csv())
    return 0


def cmd_check_condition(args: argparse.Namespace) -> int:
    cfg = _config_or_none(args)
    if args.p is None and cfg is None:
        raise UsageError("--p is required without --config")
    p = args.p if args.p is not None else cfg.solver.p
    n = args.n if args.n is not None else (cfg.n if cfg else 1)
    if args.k is None and cfg is not None:
        k = cfg.absorption
    else:
        c = args.c if args.c is not None else 1.0
        a = args.a if args.a is not None else 0.0
        k = AbsorptionProfile.power_law(a, c) if args.k == "power" else AbsorptionProfile.constant(c)
    report = condition_check(k, p, 2 * n + 2, Tmax=args.tmax, t0=args.t0)
    if args.out:
        Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    sys.stdout.write(_dump({key: v for key, v in report.to_dict().items() if key not in ("horizons", "partial")}))
    return 0


def cmd_montecarlo(args: argparse.Namespace) -> int:
    cfg = _config_or_none(args)
    base = cfg.montecarlo if cfg else McConfig(paths=1_000_000)
    flags = {"paths": args.paths, "t": args.t, "substeps": args.substeps, "n": args.n,
             "seed": args.seed, "workers": args.workers}
    mc = replace(base, **{key: v for key, v in flags.items() if v is not None})
    if not mc.acceptance_grade:
        logger.warning("fewer than 1e4 paths or 64 substeps: not an acceptance-grade run")
    spec = _grid_for(args, cfg, mc.n)
    estimate = estimate_density(sample_paths(mc), spec)
    if args.out:
        path = Path(args.out)
        write_field(path, estimate.density, extra={"montecarlo": mc.to_dict()})
        write_field(path.with_suffix(".stderr" + path.suffix), estimate.errors, extra={"montecarlo": mc.to_dict()})
    params = cfg.quadrature if cfg else None
    table = tabulate_kernel(mc.n, spec, params, cache=KernelCache(), workers=mc.workers)
    summary = {
        "config": mc.to_dict(),
        "in_box_fraction": estimate.in_box_fraction,
        "kernel": compare_with_kernel(estimate, table, mc.t, mc.workers).to_dict(),
        "kernel_2t": compare_with_kernel(estimate, table, 2 * mc.t, mc.workers).to_dict(),
    }
    sys.stdout.write(_dump(summary))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    report = run_verify(cache=KernelCache(), workers=args.workers or 1, seed=seed, mc_paths=args.paths)
    text = _dump(report.to_dict())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    for check in report.checks:
        mark = "ok  " if check.passed else "FAIL"
        print(f"{mark} {check.name:40s} {check.measured!r:>24} (tol {check.tolerance!r})")
    print(f"{len(report)} checks, {len(report.failures)} failed")
    return 0 if report.passed else 1


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON run configuration")
    common.add_argument("--out", type=str, default=None, help="output file or directory")
    common.add_argument("--workers", type=int, default=None, help="thread pool size for every stage")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("-v", dest="verbose", action="count", default=0, help="verbosity (-v, -vv)")

    parser = argparse.ArgumentParser(
        prog="hheat",
        description="Semilinear heat equation on the Heisenberg group.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", parents=[common], help="evaluate or tabulate the heat kernel")
    p.add_argument("action", nargs="?", choices=("value", "table", "list"), default="value")
    p.add_argument("--n", type=int, default=None, help="default: config n, else 1")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--point", type=str, default=None, help="x,y,tau (2n+1 values)")
    p.add_argument("--convention", choices=CONVENTIONS, default="group")
    p.add_argument("--grid", choices=("default", "wide", "compact"), default=None,
                   help="default: config grid, else the default preset")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("evolve", parents=[common], help="run the semilinear solver")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", parents=[common], help="mass dichotomy across p")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-condition", parents=[common], help="integrability of t^{-Q(p-1)/2} k(t)")
    p.add_argument("--p", type=float, default=None, help="default: config solver.p")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", choices=("constant", "power"), default=None, help="default: config absorption, else constant")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--tmax", type=float, default=2.0 ** 20)
    p.add_argument("--t0", type=float, default=1.0)
    p.set_defaults(func=cmd_check_condition)

    p = sub.add_parser("montecarlo", parents=[common], help="histogram of simulated paths vs the kernel")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--paths", type=int, default=None, help="default: config montecarlo.paths, else 1000000")
    p.add_argument("--substeps", type=int, default=None)
    p.add_argument("--grid", choices=("default", "wide", "compact"), default=None)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("verify", parents=[common], help="run the verification battery")
    p.add_argument("--paths", type=int, default=100_000, help="Monte Carlo smoke paths")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except (ConfigError, UsageError, FileNotFoundError) as e:
        print(f"hheat: error: {e}", file=sys.stderr)
        return 2
    except HeatError as e:
        print(f"hheat: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

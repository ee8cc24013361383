"""Run configuration: a JSON object with strict keys.

Minimal valid config::

    {"solver": {"p": 2.0}}

Every other key has a default; ``RunConfig.to_dict()`` echoes the filled-in
result. Unknown or mistyped keys raise ``ConfigError`` naming the dotted path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError, UsageError
from .field import GridSpec
from .heatkernel import KernelQuadratureParams
from .montecarlo import McConfig
from .solver import AbsorptionProfile, InitialData, SolverConfig

REQUIRED = object()
GRID_PRESETS = ("default", "wide", "compact")
DEFAULT_SWEEP = (1.1, 1.25, 1.5, 1.75, 2.5)


def _real(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _string(value: Any) -> bool:
    return isinstance(value, str)


def _flag(value: Any) -> bool:
    return isinstance(value, bool)


def _reals(value: Any) -> bool:
    return isinstance(value, list) and all(_real(v) for v in value)


def _grid(value: Any) -> bool:
    return isinstance(value, (str, dict))


TYPE_NAMES = {_real: "number", _integer: "integer", _string: "string", _flag: "boolean",
              _reals: "list of numbers", _grid: "preset name or object"}

Schema = dict[str, tuple[Callable[[Any], bool], Any]]

TOP: Schema = {
    "n": (_integer, 1),
    "grid": (_grid, "compact"),
    "solver": (lambda v: isinstance(v, dict), REQUIRED),
    "initial": (lambda v: isinstance(v, dict), {}),
    "absorption": (lambda v: isinstance(v, dict), {}),
    "quadrature": (lambda v: isinstance(v, dict), {}),
    "sweep": (lambda v: isinstance(v, dict), {}),
    "montecarlo": (lambda v: isinstance(v, dict), {}),
    "output": (lambda v: isinstance(v, dict), {}),
    "seed": (_integer, 0),
    "workers": (_integer, 1),
}
GRID: Schema = {
    "Lx": (_real, REQUIRED), "Ly": (_real, REQUIRED), "Ltau": (_real, REQUIRED),
    "Nx": (_integer, REQUIRED), "Ny": (_integer, REQUIRED), "Ntau": (_integer, REQUIRED),
}
SOLVER: Schema = {
    "p": (_real, REQUIRED),
    "dt": (_real, 0.25),
    "t_end": (_real, 4.0),
    "splitting": (_string, "strang"),
    "record_every": (_integer, 1),
    "snapshot_every": (_integer, 0),
    "t_start": (_real, 0.0),
}
INITIAL: Schema = {
    "kind": (_string, "bump"),
    "amplitude": (_real, 0.1),
    "radius": (_real, 2.0),
    "center": (_reals, []),
    "widths": (_reals, [1.0, 1.0, 1.0]),
    "mass": (_real, 1.0),
    "t0": (_real, 1.0),
}
ABSORPTION: Schema = {
    "kind": (_string, "constant"),
    "c": (_real, 1.0),
    "a": (_real, 0.0),
    "times": (_reals, []),
    "values": (_reals, []),
}
QUADRATURE: Schema = {
    "Lambda": (_real, 60.0),
    "panels": (_integer, 120),
    "nodes_per_panel": (_integer, 16),
    "refine_check": (_flag, True),
}
SWEEP: Schema = {
    "p_list": (_reals, list(DEFAULT_SWEEP)),
    "jobs": (_integer, 1),
}
MONTECARLO: Schema = {
    "paths": (_integer, 100_000),
    "t": (_real, 1.0),
    "substeps": (_integer, 128),
}
OUTPUT: Schema = {
    "dir": (_string, "out"),
}


def _take(block: Any, schema: Schema, prefix: str) -> dict[str, Any]:
    """Validate one block against ``schema`` and fill defaults."""
    if not isinstance(block, dict):
        raise ConfigError(prefix or "<root>", "expected an object")
    for key in block:
        if key not in schema:
            raise ConfigError(f"{prefix}{key}", "unknown key")
    out = {}
    for key, (check, default) in schema.items():
        path = f"{prefix}{key}"
        if key not in block:
            if default is REQUIRED:
                raise ConfigError(path, "missing required key")
            out[key] = default
            continue
        value = block[key]
        if not check(value):
            raise ConfigError(path, f"expected {TYPE_NAMES.get(check, 'object')}, got {value!r}")
        out[key] = value
    return out


def _build(path: str, factory: Callable[[], Any]) -> Any:
    try:
        return factory()
    except UsageError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(path, str(e)) from e


@dataclass(frozen=True)
class RunConfig:
    n: int
    grid: GridSpec
    solver: SolverConfig
    absorption: AbsorptionProfile
    quadrature: KernelQuadratureParams
    sweep_p: tuple[float, ...] = DEFAULT_SWEEP
    sweep_jobs: int = 1
    montecarlo: McConfig = field(default_factory=lambda: McConfig(paths=100_000))
    output_dir: Path = Path("out")
    seed: int = 0
    workers: int = 1
    grid_preset: str | None = "compact"

    def to_dict(self) -> dict[str, Any]:
        mc = self.montecarlo
        return {
            "n": self.n,
            "grid": self.grid_preset or {k: v for k, v in self.grid.to_dict().items() if k != "n"},
            "solver": self.solver.to_dict(),
            "initial": self.solver.initial.to_dict(),
            "absorption": self.absorption.to_dict(),
            "quadrature": self.quadrature.to_dict(),
            "sweep": {"p_list": list(self.sweep_p), "jobs": self.sweep_jobs},
            "montecarlo": {"paths": mc.paths, "t": mc.t, "substeps": mc.substeps},
            "output": {"dir": str(self.output_dir)},
            "seed": self.seed,
            "workers": self.workers,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        return config_from_dict(data)


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    top = _take(data, TOP, "")
    n = top["n"]
    if n < 1:
        raise ConfigError("n", f"must be >= 1, got {n}")
    if top["workers"] < 1:
        raise ConfigError("workers", f"must be >= 1, got {top['workers']}")

    preset = None
    if isinstance(top["grid"], str):
        preset = top["grid"]
        if preset not in GRID_PRESETS:
            raise ConfigError("grid", f"unknown preset {preset!r}, expected one of {GRID_PRESETS}")
        grid = getattr(GridSpec, preset)(n)
    else:
        g = _take(top["grid"], GRID, "grid.")
        grid = _build("grid", lambda: GridSpec(n=n, **g))

    s = _take(top["solver"], SOLVER, "solver.")
    if not s["p"] > 1:
        raise ConfigError("solver.p", f"p > 1 required, got {s['p']}")
    i = _take(top["initial"], INITIAL, "initial.")
    initial = _build("initial", lambda: InitialData.from_dict(i))
    q = _take(top["quadrature"], QUADRATURE, "quadrature.")
    params = _build("quadrature", lambda: KernelQuadratureParams.from_dict(q))
    solver = _build("solver", lambda: SolverConfig(
        p=float(s["p"]), dt=float(s["dt"]), t_end=float(s["t_end"]), splitting=s["splitting"],
        grid=grid, initial=initial, record_every=s["record_every"],
        snapshot_every=s["snapshot_every"], t_start=float(s["t_start"]), params=params,
    ))

    a = _take(top["absorption"], ABSORPTION, "absorption.")
    absorption = _build("absorption", lambda: AbsorptionProfile.from_dict(a))

    sw = _take(top["sweep"], SWEEP, "sweep.")
    bad = [p for p in sw["p_list"] if not p > 1]
    if bad or not sw["p_list"]:
        raise ConfigError("sweep.p_list", f"p > 1 required, got {bad or '[]'}")
    if sw["jobs"] < 1:
        raise ConfigError("sweep.jobs", f"must be >= 1, got {sw['jobs']}")

    m = _take(top["montecarlo"], MONTECARLO, "montecarlo.")
    mc = _build("montecarlo", lambda: McConfig(
        paths=m["paths"], t=float(m["t"]), substeps=m["substeps"], seed=top["seed"],
        n=n, workers=top["workers"],
    ))
    out = _take(top["output"], OUTPUT, "output.")

    return RunConfig(
        n=n, grid=grid, solver=solver, absorption=absorption, quadrature=params,
        sweep_p=tuple(float(p) for p in sw["p_list"]), sweep_jobs=sw["jobs"],
        montecarlo=mc, output_dir=Path(out["dir"]), seed=top["seed"],
        workers=top["workers"], grid_preset=preset,
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate JSON config text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<root>", f"invalid JSON: {e.msg} at line {e.lineno}") from e
    return config_from_dict(data)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))

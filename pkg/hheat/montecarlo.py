"""Monte Carlo oracle for the heat kernel.

Paths of the diffusion generated by the sub-Laplacian are simulated from the
identity and binned on a grid; the histogram is compared cell by cell with the
quadrature kernel.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import UsageError
from .field import GridField, GridSpec
from .heatkernel import KernelTable, cell_average_kernel
from .hgroup import HPoint
from .report import CheckResult

logger = logging.getLogger(__name__)

BATCH = 1 << 16
MIN_EXPECTED = 20.0
Z_LIMIT = 3.0
MAX_FLAGGED = 0.01
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class McConfig:
    """Simulation settings.

    ``substeps`` is per unit time; a run to ``t`` takes ``ceil(substeps * t)``
    Euler steps. Results are bit-identical for a fixed ``(seed, workers)``.
    """

    paths: int
    t: float = 1.0
    substeps: int = 128
    seed: int = 0
    n: int = 1
    workers: int = 1

    def __post_init__(self) -> None:
        if self.paths < 1:
            raise UsageError(f"paths must be positive, got {self.paths}")
        if self.substeps < 1:
            raise UsageError(f"substeps must be positive, got {self.substeps}")
        if not self.t > 0:
            raise UsageError(f"t must be positive, got {self.t}")
        if self.n < 1:
            raise UsageError(f"n must be >= 1, got {self.n}")
        if self.workers < 1:
            raise UsageError(f"workers must be >= 1, got {self.workers}")

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.substeps * self.t - 1e-9))

    @property
    def acceptance_grade(self) -> bool:
        return self.paths >= 10_000 and self.substeps >= 64

    def to_dict(self) -> dict[str, Any]:
        return {
            "paths": self.paths,
            "t": self.t,
            "substeps": self.substeps,
            "seed": self.seed,
            "n": self.n,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> McConfig:
        return cls(
            paths=int(data["paths"]),
            t=float(data.get("t", 1.0)),
            substeps=int(data.get("substeps", 128)),
            seed=int(data.get("seed", 0)),
            n=int(data.get("n", 1)),
            workers=int(data.get("workers", 1)),
        )


@dataclass
class Ensemble:
    """Path endpoints; ``x`` and ``y`` have shape ``(paths, n)``."""

    x: np.ndarray
    y: np.ndarray
    tau: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.tau.shape[0]

    def coords(self) -> np.ndarray:
        """``(paths, 2n+1)`` array in grid axis order."""
        return np.column_stack((self.x, self.y, self.tau))

    def point(self, i: int) -> HPoint:
        return HPoint(tuple(self.x[i]), tuple(self.y[i]), float(self.tau[i]))

    def dilated(self, lam: float) -> Ensemble:
        if not lam > 0:
            raise UsageError(f"dilation factor must be positive, got {lam}")
        return Ensemble(lam * self.x, lam * self.y, lam * lam * self.tau)

    def inverted(self) -> Ensemble:
        return Ensemble(-self.x, -self.y, -self.tau)


def _simulate(count: int, steps: int, dt: float, n: int, rng: np.random.Generator) -> Ensemble:
    xs, ys, taus = [], [], []
    scale = math.sqrt(dt)
    for start in range(0, count, BATCH):
        size = min(BATCH, count - start)
        x = np.zeros((size, n))
        y = np.zeros((size, n))
        tau = np.zeros(size)
        for _ in range(steps):
            dB = rng.standard_normal((size, 2 * n)) * scale
            dx, dy = dB[:, :n], dB[:, n:]
            # pre-update x, y
            tau += 2.0 * SQRT2 * np.sum(x * dy - y * dx, axis=1)
            x += SQRT2 * dx
            y += SQRT2 * dy
        xs.append(x)
        ys.append(y)
        taus.append(tau)
    return Ensemble(np.concatenate(xs), np.concatenate(ys), np.concatenate(taus))


def sample_paths(cfg: McConfig) -> Ensemble:
    """Endpoints at time ``cfg.t`` of paths started at the identity.

    Paths are split into ``cfg.workers`` contiguous chunks, each with its own
    stream spawned from ``SeedSequence(cfg.seed)``; chunks are concatenated in
    worker order.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.workers)
    base, extra = divmod(cfg.paths, cfg.workers)
    counts = [base + (1 if i < extra else 0) for i in range(cfg.workers)]
    steps = cfg.steps
    dt = cfg.t / steps

    def run(i: int) -> Ensemble:
        return _simulate(counts[i], steps, dt, cfg.n, np.random.default_rng(streams[i]))

    logger.info("simulating %d paths, %d steps of %.4g", cfg.paths, steps, dt)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(run, range(cfg.workers)))
    else:
        parts = [run(0)]
    parts = [p for p in parts if len(p)]
    return Ensemble(
        np.concatenate([p.x for p in parts]),
        np.concatenate([p.y for p in parts]),
        np.concatenate([p.tau for p in parts]),
    )


@dataclass
class HistogramEstimate:
    density: GridField
    errors: GridField
    counts: np.ndarray = field(repr=False)
    paths: int

    @property
    def in_box_fraction(self) -> float:
        return float(self.counts.sum()) / self.paths


def estimate_density(ensemble: Ensemble, spec: GridSpec) -> HistogramEstimate:
    """Normalized histogram ``counts / (paths * cell_volume)`` with binomial standard errors.

    Cells are centred on the grid nodes.
    """
    paths = len(ensemble)
    if paths == 0:
        raise UsageError("empty ensemble")
    if ensemble.n != spec.n:
        raise UsageError(f"ensemble has n={ensemble.n}, grid has n={spec.n}")
    coords = ensemble.coords()
    inside = np.ones(paths, dtype=bool)
    flat = np.zeros(paths, dtype=np.int64)
    for axis, (h, N) in enumerate(zip(spec.spacings, spec.shape)):
        idx = np.floor(coords[:, axis] / h + N // 2 + 0.5).astype(np.int64)
        inside &= (idx >= 0) & (idx < N)
        flat = flat * N + np.clip(idx, 0, N - 1)
    size = int(np.prod(spec.shape))
    counts = np.bincount(flat[inside], minlength=size).reshape(spec.shape)
    share = counts / paths
    dv = spec.cell_volume
    density = GridField(spec, share / dv, nonnegative=True)
    errors = GridField(spec, np.sqrt(share * (1.0 - share) / paths) / dv, nonnegative=True)
    return HistogramEstimate(density=density, errors=errors, counts=counts, paths=paths)


@dataclass
class McComparison:
    cells: int
    flagged: int
    worst_z: float
    worst_index: tuple[int, ...] | None
    z: np.ndarray = field(repr=False)

    @property
    def fraction(self) -> float:
        return self.flagged / self.cells if self.cells else 0.0

    @property
    def passed(self) -> bool:
        return self.cells > 0 and self.fraction <= MAX_FLAGGED

    def check(self, name: str = "montecarlo.kernel_agreement") -> CheckResult:
        return CheckResult(
            name, self.passed, self.fraction, MAX_FLAGGED,
            detail=f"{self.flagged}/{self.cells} cells with |z| > {Z_LIMIT:g}",
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "cells": self.cells,
            "flagged": self.flagged,
            "fraction": self.fraction,
            "worst_z": self.worst_z,
            "worst_index": list(self.worst_index) if self.worst_index else None,
            "passed": self.passed,
        }


def _summarize(z: np.ndarray, mask: np.ndarray) -> McComparison:
    z = np.where(mask, z, 0.0)
    cells = int(mask.sum())
    if not cells:
        return McComparison(0, 0, 0.0, None, z)
    worst = np.unravel_index(int(np.argmax(np.abs(z))), z.shape)
    return McComparison(
        cells=cells,
        flagged=int((np.abs(z) > Z_LIMIT).sum()),
        worst_z=float(z[worst]),
        worst_index=tuple(int(i) for i in worst),
        z=z,
    )


def compare_densities(a: HistogramEstimate, b: HistogramEstimate) -> McComparison:
    """Cellwise z-scores between two histograms on the same grid."""
    if a.density.spec != b.density.spec:
        raise UsageError("histograms live on different grids")
    se = np.hypot(a.errors.values, b.errors.values)
    diff = a.density.values - b.density.values
    z = np.divide(diff, se, out=np.zeros_like(diff), where=se > 0)
    expected = 0.5 * (a.counts + b.counts)
    return _summarize(z, expected >= MIN_EXPECTED)


def compare_with_kernel(
    estimate: HistogramEstimate,
    table: KernelTable,
    t: float,
    workers: int = 1,
) -> McComparison:
    """z-scores of the histogram against cell averages of ``h_t``.

    Only cells with expected count at least 20 take part. The histogram's own
    binomial error is the scale; a cell with no hits falls back to the error
    implied by the kernel.
    """
    spec = estimate.density.spec
    if spec.n != table.n:
        raise UsageError(f"histogram has n={spec.n}, table has n={table.n}")
    expected = cell_average_kernel(spec, t, table.params, workers).values
    share = expected * spec.cell_volume
    counts = share * estimate.paths
    fallback = np.sqrt(share * (1.0 - share) / estimate.paths) / spec.cell_volume
    se = np.where(estimate.errors.values > 0, estimate.errors.values, fallback)
    diff = estimate.density.values - expected
    z = np.divide(diff, se, out=np.zeros_like(diff), where=se > 0)
    result = _summarize(z, counts >= MIN_EXPECTED)
    logger.info("t=%g: %d of %d cells beyond %g sigma", t, result.flagged, result.cells, Z_LIMIT)
    return result

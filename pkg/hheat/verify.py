"""The one-shot verification battery behind ``hheat verify``.

Each suite appends named checks to a :class:`~hheat.report.VerifyReport`. A suite
that raises records a failed check under the name it was working on, so one
broken piece never hides the others.
"""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from typing import Iterator

import numpy as np

from .asymptotics import (
    CutoffFamily,
    GaussianProbe,
    LinearProbe,
    condition_check,
    cutoff_lemma_check,
    default_cutoff_samples,
    taylor_expansion_check,
)
from .errors import HeatError
from .field import GridSpec, integrate_field, lp_norm, subtract
from .heatkernel import (
    DEFAULT_PARAMS,
    KernelTable,
    gradient_l1_check,
    group_convolve,
    kernel_value,
    linf_decay,
    sample_kernel,
    spike,
    table_key,
    unit_kernel,
)
from .hgroup import GroupDim, HPoint, dilate, group_inv, group_mul, koranyi_dist, koranyi_norm
from .montecarlo import McConfig, compare_with_kernel, estimate_density, sample_paths
from .report import CheckResult, VerifyReport
from .solver import (
    AbsorptionProfile,
    InitialData,
    SolverConfig,
    comparison_check,
    evolve,
    mass_identity_residual,
)
from .storage import KernelCache

logger = logging.getLogger(__name__)

# solver checks run on this small box so the battery stays at desk scale
SOLVER_GRID = GridSpec(1, 6.0, 6.0, 10.0, 24, 24, 80)
MC_GRID = GridSpec(1, 6.0, 6.0, 24.0, 24, 24, 48)


@contextmanager
def _guard(report: VerifyReport, name: str) -> Iterator[None]:
    try:
        yield
    except HeatError as e:
        logger.warning("%s failed: %s", name, e)
        report.fail(name, f"{type(e).__name__}: {e}")


def _random_points(rng: np.random.Generator, count: int, n: int = 1, scale: float = 2.0) -> list[HPoint]:
    return [HPoint.from_coords(rng.uniform(-scale, scale, 2 * n + 1)) for _ in range(count)]


def _max_gap(a: HPoint, b: HPoint) -> float:
    return max(abs(u - v) for u, v in zip(a.coords(), b.coords()))


def _rel_gap(a: HPoint, b: HPoint) -> float:
    return _max_gap(a, b) / max(1.0, *(abs(u) for u in b.coords()))


DILATIONS = (0.5, 2.0, 10.0)


def group_suite(report: VerifyReport, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    pts = _random_points(rng, 3000, n=2)
    triples = list(zip(pts[0::3], pts[1::3], pts[2::3]))
    origin = HPoint.origin(2)

    gap = max(max(_max_gap(group_mul(origin, a), a), _max_gap(group_mul(a, origin), a)) for a in pts)
    report.add(CheckResult("group.identity", gap == 0.0, gap, 0.0))

    gap = max(_max_gap(group_mul(a, group_inv(a)), origin) for a in pts)
    report.add(CheckResult("group.inverse", gap <= 1e-12, gap, 1e-12))

    gap = max(_rel_gap(group_mul(group_mul(a, b), c), group_mul(a, group_mul(b, c))) for a, b, c in triples)
    report.add(CheckResult("group.associativity", gap <= 1e-12, gap, 1e-12))

    gap = max(
        _rel_gap(dilate(lam, group_mul(a, b)), group_mul(dilate(lam, a), dilate(lam, b)))
        for lam in DILATIONS for a, b, _ in triples
    )
    report.add(CheckResult("group.dilation_automorphism", gap <= 1e-12, gap, 1e-12))

    gap = max(
        abs(koranyi_norm(dilate(lam, a)) - lam * koranyi_norm(a)) / max(1.0, lam * koranyi_norm(a))
        for lam in DILATIONS for a in pts
    )
    report.add(CheckResult("group.norm_homogeneity", gap <= 1e-12, gap, 1e-12))

    gap = max(abs(koranyi_dist(a, b) - koranyi_dist(b, a)) for a, b, _ in triples)
    report.add(CheckResult("group.distance_symmetry", gap <= 1e-12, gap, 1e-12))


def kernel_suite(report: VerifyReport, cache: KernelCache | None = None, workers: int = 1, seed: int = 0) -> None:
    n = 1
    with _guard(report, "kernel.origin_oracle"):
        value = kernel_value(n, 1.0, HPoint.origin(n), convention="literal")
        gap = abs(value * 32.0 * math.pi - 1.0)
        report.add(CheckResult("kernel.origin_oracle", gap <= 1e-6, gap, 1e-6))
        value = kernel_value(n, 1.0, HPoint.origin(n))
        gap = abs(value * 64.0 - 1.0)
        report.add(CheckResult("kernel.origin_normalized", gap <= 1e-6, gap, 1e-6))

    spec = GridSpec.default(n)
    table = None
    with _guard(report, "kernel.table"):
        key = table_key(n, spec, DEFAULT_PARAMS)
        if cache is not None and cache.exists(key):
            table = cache.load(key)
        else:
            table = KernelTable(n, spec, DEFAULT_PARAMS, sample_kernel(spec, 1.0, DEFAULT_PARAMS, workers))
            if cache is not None:
                cache.save(table)
        for check in table.checks():
            report.add(check)

    with _guard(report, "kernel.scaling"):
        rng = np.random.default_rng(seed)
        gap = 0.0
        for p in _random_points(rng, 20, n=n):
            t = float(rng.uniform(0.25, 4.0))
            lhs = kernel_value(n, t, dilate(math.sqrt(t), p)) * t ** (GroupDim(n).Q / 2)
            rhs = kernel_value(n, 1.0, p)
            gap = max(gap, abs(lhs - rhs) / max(abs(rhs), 1e-300))
        report.add(CheckResult("kernel.scaling", gap <= 1e-10, gap, 1e-10))

    with _guard(report, "kernel.semigroup"):
        h1 = sample_kernel(spec, 1.0, workers=workers)
        h2 = sample_kernel(spec, 2.0, workers=workers)
        gap = lp_norm(subtract(group_convolve(h1, h1, workers), h2), 1)
        report.add(CheckResult("kernel.semigroup", gap <= 5e-2, gap, 5e-2))

    with _guard(report, "kernel.linf_decay_slope"):
        compact = GridSpec.compact(n)
        slope, _ = linf_decay(spike(compact), [1.0, 2.0, 4.0, 8.0], workers=workers)
        target = -GroupDim(n).Q / 2
        report.add(CheckResult("kernel.linf_decay_slope", abs(slope - target) <= 0.15, slope - target, 0.15))

    if table is not None:
        with _guard(report, "kernel.gradient_slope"):
            decay = gradient_l1_check(table, [0.5, 1.0, 2.0, 4.0], workers=workers)
            ok = -0.6 <= decay.slope <= -0.4
            report.add(CheckResult("kernel.gradient_slope", ok, decay.slope, 0.1, detail="target -0.5"))

    with _guard(report, "kernel.gaussian_upper"):
        # h_1 t^{Q/2} never exceeds its value at the origin
        rng = np.random.default_rng(seed + 1)
        a = rng.uniform(0.0, 6.0, 200)
        b = rng.uniform(0.0, 6.0, 200)
        peak = unit_kernel(n, np.zeros(1), np.zeros(1))[0]
        excess = float((unit_kernel(n, a, b) - peak).max())
        report.add(CheckResult("kernel.gaussian_upper", excess <= 0.0, excess, 0.0))


def solver_suite(report: VerifyReport, workers: int = 1) -> None:
    k = AbsorptionProfile.constant(1.0)
    initial = InitialData(kind="gaussian", amplitude=1.0)
    base = SolverConfig(p=2.0, dt=0.5, t_end=1.0, grid=SOLVER_GRID, initial=initial)
    u0 = initial.sample(SOLVER_GRID)

    residuals = []
    with _guard(report, "solver.structure"):
        for dt in (0.5, 0.25):
            run = evolve(u0, SolverConfig(p=2.0, dt=dt, t_end=1.0, grid=SOLVER_GRID, initial=initial), k, workers)
            residuals.append(mass_identity_residual(run.trace))
            if dt == 0.5:
                low = float(run.final.values.min())
                peak = max(r.linf for r in run.trace) / float(u0.values.max())
                ok, _ = run.trace.verify()
                report.add(CheckResult("solver.positivity", low >= 0.0, low, 0.0))
                report.add(CheckResult("solver.maximum_principle", peak <= 1.0 + 1e-12, peak, 1.0))
                report.add(CheckResult("solver.monotone_mass", ok, float(not ok), 0.0))
        m0 = integrate_field(u0)
        report.add(CheckResult("solver.mass_identity", residuals[0] <= 1e-2 * m0, residuals[0] / m0, 1e-2))
        ratio = residuals[0] / max(residuals[1], 1e-300)
        report.add(CheckResult("solver.mass_identity_refinement", ratio >= 1.5, ratio, 1.5))

    with _guard(report, "solver.comparison"):
        ok, violation = comparison_check(u0.scaled(0.5), u0, base, k, workers)
        report.add(CheckResult("solver.comparison", ok, violation, 1e-12))


def analysis_suite(report: VerifyReport, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    with _guard(report, "analysis.taylor"):
        gap = 0.0
        probes = [GaussianProbe(), LinearProbe((0.3,), (-1.2,), 0.7)]
        for _ in range(10):
            eta, xi = _random_points(rng, 2, n=1, scale=1.0)
            for probe in probes:
                lhs, rhs = taylor_expansion_check(probe, eta, xi)
                gap = max(gap, abs(lhs - rhs))
        report.add(CheckResult("analysis.taylor", gap <= 1e-8, gap, 1e-8))

    with _guard(report, "analysis.cutoff"):
        result = cutoff_lemma_check([1.0, 10.0, 100.0], 2.0, default_cutoff_samples(count=200, seed=seed))
        report.add(CheckResult("analysis.cutoff_uniform", result.uniformity <= 2.0, result.uniformity, 2.0))
        report.add(CheckResult(
            "analysis.cutoff_difference", result.max_disagreement <= 1e-4, result.max_disagreement, 1e-4,
        ))
        family = CutoffFamily(10.0, 2.0)
        report.add(CheckResult("analysis.cutoff_ell", family.ell == 4.0, family.ell, 4.0))

    with _guard(report, "condition.classification"):
        k = AbsorptionProfile.constant(1.0)
        above = condition_check(k, 2.0, 4)
        below = condition_check(k, 1.25, 4)
        ok = above.verdict == "converges" and below.verdict == "diverges"
        report.add(CheckResult(
            "condition.classification", ok, float(not ok), 0.0,
            detail=f"p=2: {above.verdict}, p=1.25: {below.verdict}",
        ))


def montecarlo_suite(report: VerifyReport, seed: int = 0, workers: int = 1, paths: int = 100_000) -> None:
    with _guard(report, "montecarlo.smoke"):
        cfg = McConfig(paths=paths, t=1.0, substeps=64, seed=seed, workers=workers)
        ensemble = sample_paths(cfg)
        var = float(np.var(ensemble.x[:, 0]))
        sigma = 2.0 * math.sqrt(2.0 / paths)
        z = abs(var - 2.0) / sigma
        report.add(CheckResult("montecarlo.x_variance", z <= 3.0, z, 3.0, detail=f"variance {var:.4f}"))
        estimate = estimate_density(ensemble, MC_GRID)
        table = KernelTable(1, MC_GRID, DEFAULT_PARAMS, sample_kernel(MC_GRID, 1.0))
        report.add(compare_with_kernel(estimate, table, 1.0, workers).check())


def run_verify(
    cache: KernelCache | None = None,
    workers: int = 1,
    seed: int = 0,
    mc_paths: int = 100_000,
) -> VerifyReport:
    """Run every suite. ``report.passed`` is False if any named check failed."""
    report = VerifyReport(config={"seed": seed, "mc_paths": mc_paths})
    group_suite(report, seed)
    kernel_suite(report, cache, workers, seed)
    solver_suite(report, workers)
    analysis_suite(report, seed)
    montecarlo_suite(report, seed, workers, mc_paths)
    logger.info("verify: %d checks, %d failed", len(report), len(report.failures))
    return report

"""Long-time behaviour: the integrability condition on k, the mass dichotomy,
convergence to the rescaled kernel, the Taylor and profile estimates, the
cut-off family and the capacity functional.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Protocol, Sequence

import numpy as np
from scipy import integrate, special

from .errors import NumericalError, UsageError
from .field import GridField, integrate_field, lp_norm, subtract, sublaplacian_at
from .heatkernel import KernelTable, fit_slope, group_convolve, sample_kernel
from .hgroup import GroupDim, HPoint, group_mul, koranyi_norm_arrays, norm_sq_arrays
from .report import CheckResult
from .solver import AbsorptionProfile, EvolveResult, SolverConfig, evolve, mass_identity_residual
from .trace import MassTrace

logger = logging.getLogger(__name__)

# p at or below 1 + 2/Q (plus this slack) belongs to the extinction regime
REGIME_SLACK = 1e-12


def regime(p: float, Q: int) -> str:
    return "extinction" if p <= 1.0 + 2.0 / Q + REGIME_SLACK else "persistence"


# -- integrability of t^{-Q(p-1)/2} k(t) --------------------------------------


@dataclass
class ConditionReport:
    p: float
    Q: int
    k: str
    t0: float
    horizons: list[float]
    partial: list[float]
    exponent: float
    closed_form: str
    numeric: str
    verdict: str
    extrapolated: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "Q": self.Q,
            "k": self.k,
            "t0": self.t0,
            "exponent": self.exponent,
            "closed_form": self.closed_form,
            "numeric": self.numeric,
            "verdict": self.verdict,
            "extrapolated": self.extrapolated,
            "horizons": self.horizons,
            "partial": self.partial,
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(("T", "integral"))
        for T, value in zip(self.horizons, self.partial):
            writer.writerow((repr(T), repr(value)))
        return buffer.getvalue()


def condition_check(
    k: AbsorptionProfile,
    p: float,
    Q: int,
    Tmax: float = 2.0 ** 20,
    t0: float = 1.0,
    rtol: float = 1e-2,
) -> ConditionReport:
    """Classify ``int_{t0}^inf t^{-Q(p-1)/2} k(t) dt``.

    Partial integrals are taken over ``[t0, T]`` with ``T`` doubling up to
    ``Tmax``. They are called Cauchy when the increments shrink geometrically
    and the last one is below ``rtol`` of the running value. "converges" is
    reported only when they are.
    """
    if not p > 1:
        raise UsageError(f"p > 1 required, got {p}")
    if not t0 > 0 or Tmax <= 2 * t0:
        raise UsageError(f"need 0 < t0 and Tmax > 2 t0, got t0={t0}, Tmax={Tmax}")
    decay = -0.5 * Q * (p - 1.0)
    exponent = decay + k.tail_exponent
    closed = "converges" if exponent < -1.0 else "diverges"

    def integrand(t: float) -> float:
        return t ** decay * float(k(t))

    horizons = [t0]
    partial = [0.0]
    T = t0
    while 2 * T <= Tmax:
        points = [s for s in k.times if T < s < 2 * T] or None
        piece, _ = integrate.quad(integrand, T, 2 * T, points=points, limit=200)
        T *= 2
        horizons.append(T)
        partial.append(partial[-1] + piece)

    increments = np.diff(partial)
    numeric = "inconclusive"
    extrapolated = None
    if increments.size >= 3 and increments[-2] > 0:
        ratio = increments[-1] / increments[-2]
        if ratio >= 1.0 - 1e-3:
            numeric = "diverges"
        elif ratio <= 0.9:
            tail = increments[-1] * ratio / (1.0 - ratio)
            extrapolated = partial[-1] + tail
            if increments[-1] <= rtol * partial[-1]:
                numeric = "converges"

    if closed == "converges":
        verdict = "converges" if numeric == "converges" else "inconclusive"
    else:
        verdict = "diverges"
    logger.debug("condition p=%g Q=%d %s: exponent %.4g -> %s", p, Q, k.describe(), exponent, verdict)
    return ConditionReport(
        p=p, Q=Q, k=k.describe(), t0=t0, horizons=horizons, partial=partial,
        exponent=exponent, closed_form=closed, numeric=numeric, verdict=verdict,
        extrapolated=extrapolated,
    )


# -- dichotomy ----------------------------------------------------------------


@dataclass
class SweepRow:
    p: float
    regime: str
    mass_ratio: float
    in_box_ratio: float
    plateau: float
    decay_exponent: float
    residual: float
    trace: MassTrace = field(repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "regime": self.regime,
            "mass_ratio": self.mass_ratio,
            "in_box_ratio": self.in_box_ratio,
            "plateau": self.plateau,
            "decay_exponent": self.decay_exponent,
            "residual": self.residual,
        }


SWEEP_COLUMNS = ("p", "regime", "mass_ratio", "in_box_ratio", "plateau", "decay_exponent", "residual")


@dataclass
class SweepResult:
    Q: int
    rows: list[SweepRow]
    results: dict[float, EvolveResult] = field(default_factory=dict, repr=False)

    @property
    def critical(self) -> float:
        return 1.0 + 2.0 / self.Q

    def row(self, p: float) -> SweepRow:
        for r in self.rows:
            if r.p == p:
                return r
        raise KeyError(f"p={p} not in sweep")

    def plateau_ordering(self) -> bool:
        """Plateau indicators do not grow with p above the critical exponent."""
        above = [r.plateau for r in sorted(self.rows, key=lambda r: r.p) if r.p > self.critical]
        return all(b <= a * (1 + 1e-9) for a, b in zip(above, above[1:]))

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in sorted(self.rows, key=lambda r: r.p):
            d = r.to_dict()
            writer.writerow([d["regime"] if c == "regime" else repr(float(d[c])) for c in SWEEP_COLUMNS])
        return buffer.getvalue()


def _summarize(p: float, Q: int, run: EvolveResult) -> SweepRow:
    trace = run.trace
    first, last = trace[0], trace.final
    m0 = first.mass
    half = trace.at_time(first.t + 0.5 * (last.t - first.t))
    corrected = trace.column("corrected_mass")
    times = trace.column("t") - first.t
    late = (times >= 0.5 * times[-1]) & (times > 0) & (corrected > 0)
    exponent = fit_slope(times[late], corrected[late]) if late.sum() >= 2 else math.nan
    return SweepRow(
        p=p,
        regime=regime(p, Q),
        mass_ratio=last.corrected_mass / m0,
        in_box_ratio=last.mass / m0,
        plateau=abs(last.corrected_mass - half.corrected_mass) / m0,
        decay_exponent=exponent,
        residual=mass_identity_residual(trace) / m0,
        trace=trace,
    )


def dichotomy_sweep(
    p_list: Sequence[float],
    cfg: SolverConfig,
    k: AbsorptionProfile,
    workers: int = 1,
    jobs: int = 1,
    keep_runs: bool = False,
) -> SweepResult:
    """Run ``cfg`` for each ``p`` and summarize the mass behaviour.

    Masses are leak corrected: in-box mass plus what left the box, i.e. the
    initial mass minus the absorbed mass. ``jobs`` runs execute concurrently,
    each using ``workers`` threads for its convolutions.
    """
    bad = [p for p in p_list if not p > 1]
    if bad:
        raise UsageError(f"p > 1 required, got {bad}")
    Q = GroupDim(cfg.grid.n).Q
    if not k.infimum(cfg.t_start + cfg.t_end) > 0:
        raise UsageError("dichotomy_sweep needs inf k > 0 over the horizon")
    u0 = cfg.initial.sample(cfg.grid, cfg.params)

    def run(p: float) -> tuple[float, EvolveResult]:
        return p, evolve(u0, replace(cfg, p=p), k, workers)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, p_list))
    else:
        outcomes = [run(p) for p in p_list]
    rows = [_summarize(p, Q, result) for p, result in outcomes]
    runs = {p: result for p, result in outcomes} if keep_runs else {}
    return SweepResult(Q=Q, rows=rows, results=runs)


# -- convergence to the rescaled kernel ---------------------------------------


@dataclass
class ProfileSeries:
    q: float
    m_hat: float
    times: list[float]
    values: list[float]
    relative: list[float]

    def decreasing_tail(self, count: int = 3) -> bool:
        tail = self.values[-count:]
        return len(tail) == count and all(b < a for a, b in zip(tail, tail[1:]))


def profile_convergence(
    run: EvolveResult,
    q: float,
    time_shift: float = 0.0,
    m_hat: float | None = None,
    workers: int = 1,
    table: KernelTable | None = None,
) -> ProfileSeries:
    """``t^{(Q/2)(1 - 1/q)} ||u(t) - M h_{t + time_shift}||_q`` at every snapshot with t > 0.

    ``M`` defaults to the last recorded in-box mass. With ``table``, each
    ``h_t`` is dilated from the tabulated ``h_1`` rather than recomputed.
    """
    if not q >= 1:
        raise UsageError(f"q must be >= 1, got {q}")
    trace = run.trace
    m_hat = trace.final.mass if m_hat is None else m_hat
    if not m_hat > 0:
        raise UsageError(f"inapplicable regime: estimated limit mass {m_hat!r} is not positive")
    if not run.snapshots:
        raise UsageError("profile_convergence needs snapshots")
    Q = GroupDim(run.final.spec.n).Q
    start = trace[0].t
    weight_power = 0.5 * Q * (1.0 - 1.0 / q)
    times, values, relative = [], [], []
    for t_abs, u in run.snapshots:
        t = t_abs - start + time_shift
        if t <= 0:
            continue
        kernel = table.dilated(t, u.spec) if table is not None else sample_kernel(u.spec, t, workers=workers)
        profile = kernel.scaled(m_hat)
        w = t ** weight_power
        times.append(t_abs)
        values.append(w * lp_norm(subtract(u, profile), q))
        relative.append(values[-1] / (w * lp_norm(profile, q)))
    return ProfileSeries(q=q, m_hat=m_hat, times=times, values=values, relative=relative)


# -- Taylor identity ----------------------------------------------------------


class Probe(Protocol):
    """A smooth function with analytic horizontal gradient and vertical derivative."""

    def value(self, p: HPoint) -> float: ...

    def horizontal_gradient(self, p: HPoint) -> np.ndarray: ...

    def vertical_derivative(self, p: HPoint) -> float: ...


@dataclass(frozen=True)
class GaussianProbe:
    """``exp(-|x|^2 - |y|^2 - tau^2)``."""

    def value(self, p: HPoint) -> float:
        return math.exp(-p.r2() - p.tau ** 2)

    def vertical_derivative(self, p: HPoint) -> float:
        return -2.0 * p.tau * self.value(p)

    def horizontal_gradient(self, p: HPoint) -> np.ndarray:
        f = self.value(p)
        ft = self.vertical_derivative(p)
        x, y = np.array(p.x), np.array(p.y)
        return np.concatenate((-2.0 * x * f - 2.0 * y * ft, -2.0 * y * f + 2.0 * x * ft))


@dataclass(frozen=True)
class LinearProbe:
    """``a.x + b.y + c tau``."""

    a: tuple[float, ...]
    b: tuple[float, ...]
    c: float = 0.0

    def value(self, p: HPoint) -> float:
        return float(np.dot(self.a, p.x) + np.dot(self.b, p.y) + self.c * p.tau)

    def vertical_derivative(self, p: HPoint) -> float:
        return self.c

    def horizontal_gradient(self, p: HPoint) -> np.ndarray:
        x, y = np.array(p.x), np.array(p.y)
        return np.concatenate((np.array(self.a) - 2.0 * y * self.c, np.array(self.b) + 2.0 * x * self.c))


def taylor_expansion_check(f: Probe, eta: HPoint, xi: HPoint, order: int = 64) -> tuple[float, float]:
    """``(f(eta o xi), f(eta) + int_0^1 (x', y', 2 s tau').(grad_H f, T f)(eta o delta_s xi) ds)``."""
    if eta.n != xi.n:
        raise UsageError(f"dimension mismatch: n={eta.n} and n={xi.n}")
    lhs = f.value(group_mul(eta, xi))
    nodes, weights = special.roots_legendre(order)
    s_nodes = 0.5 * (nodes + 1.0)
    horizontal = np.array((*xi.x, *xi.y))
    remainder = 0.0
    for s, w in zip(s_nodes, 0.5 * weights):
        at = group_mul(eta, HPoint(tuple(s * v for v in xi.x), tuple(s * v for v in xi.y), s * s * xi.tau))
        integrand = float(np.dot(horizontal, f.horizontal_gradient(at)))
        integrand += 2.0 * s * xi.tau * f.vertical_derivative(at)
        remainder += w * integrand
    return lhs, f.value(eta) + remainder


# -- profile lemma ------------------------------------------------------------


@dataclass
class ProfileLemmaResult:
    ts: list[float]
    series: list[float]
    scaled: list[float]
    mass: float
    weighted_norm: float

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.series, self.series[1:]))

    @property
    def spread(self) -> float:
        """max/min of ``series(t) t^{1/2}``."""
        return max(self.scaled) / min(self.scaled)


def profile_lemma_check(g: GridField, t_list: Sequence[float], workers: int = 1) -> ProfileLemmaResult:
    """``||h_t * g - M_g h_t||_1`` for each t, with the same sampled kernel on both sides."""
    spec = g.spec
    x, y, tau = spec.coordinate_arrays()
    gauge = koranyi_norm_arrays(x, y, tau)
    weighted = float(np.sum((gauge + gauge ** 2) * np.abs(g.values)) * spec.cell_volume)
    mass = integrate_field(g)
    series, scaled = [], []
    for t in t_list:
        kernel = sample_kernel(spec, t, workers=workers)
        km = integrate_field(kernel)
        if km > 1.0:
            kernel = kernel.scaled(1.0 / km)
        diff = subtract(group_convolve(kernel, g, workers), kernel.scaled(mass))
        series.append(lp_norm(diff, 1))
        scaled.append(series[-1] * math.sqrt(t))
    return ProfileLemmaResult(
        ts=[float(t) for t in t_list], series=series, scaled=scaled, mass=mass, weighted_norm=weighted
    )


# -- cut-off family -----------------------------------------------------------


def smoothstep(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quintic step from 0 at s = 1/2 to 1 at s = 1, with its first two derivatives."""
    r = np.clip(2.0 * np.asarray(s, dtype=np.float64) - 1.0, 0.0, 1.0)
    inside = (r > 0.0) & (r < 1.0)
    value = r ** 3 * (10.0 - 15.0 * r + 6.0 * r * r)
    d1 = np.where(inside, 2.0 * 30.0 * r * r * (r - 1.0) ** 2, 0.0)
    d2 = np.where(inside, 4.0 * 60.0 * r * (2.0 * r - 1.0) * (r - 1.0), 0.0)
    return value, d1, d2


@dataclass(frozen=True)
class CutoffFamily:
    """``phi_R(t, eta) = Phi(xi)^l`` with ``xi = (t + |eta|_H^2) / R`` and ``l = 2p / (p - 1)``."""

    R: float
    p: float
    n: int = 1

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise UsageError(f"R must be positive, got {self.R}")
        if not self.p > 1:
            raise UsageError(f"p > 1 required, got {self.p}")

    @property
    def ell(self) -> float:
        return 2.0 * self.p / (self.p - 1.0)

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    def xi(self, t: np.ndarray, x: np.ndarray, y: np.ndarray, tau: np.ndarray) -> np.ndarray:
        return (t + norm_sq_arrays(x, y, tau)) / self.R

    def _powers(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``F = Phi^l`` and ``F'``, ``F''`` at ``xi``."""
        l = self.ell
        phi, d1, d2 = smoothstep(xi)
        F = phi ** l
        base = np.where(phi > 0, phi, 1.0)
        F1 = np.where(phi > 0, l * base ** (l - 1) * d1, 0.0)
        F2 = np.where(phi > 0, l * (l - 1) * base ** (l - 2) * d1 ** 2 + l * base ** (l - 1) * d2, 0.0)
        return F, F1, F2

    def phi(self, t, x, y, tau) -> np.ndarray:
        return self._powers(self.xi(t, x, y, tau))[0]

    def phi_star(self, t, x, y, tau) -> np.ndarray:
        """``phi_R`` restricted to the transition band ``1/2 <= xi <= 1``."""
        xi = self.xi(t, x, y, tau)
        return np.where((xi >= 0.5) & (xi <= 1.0), self._powers(xi)[0], 0.0)

    def dt_phi(self, t, x, y, tau) -> np.ndarray:
        return self._powers(self.xi(t, x, y, tau))[1] / self.R

    def sublaplacian(self, t, x, y, tau) -> np.ndarray:
        """Chain rule with ``|grad_H N|^2 = 4 r^2`` and ``Delta_H N = 2 Q r^2 / N``, ``N = |eta|_H^2``."""
        x, y, tau = np.asarray(x, float), np.asarray(y, float), np.asarray(tau, float)
        r2 = np.sum(x * x, axis=-1) + np.sum(y * y, axis=-1)
        N = np.hypot(r2, tau)
        _, F1, F2 = self._powers((t + N) / self.R)
        ratio = np.where(N > 0, r2 / np.where(N > 0, N, 1.0), 0.0)
        return F2 * 4.0 * r2 / self.R ** 2 + F1 * 2.0 * self.Q * ratio / self.R


@dataclass
class CutoffCheck:
    max_ratio: dict[float, float]
    max_disagreement: float
    compared: int

    @property
    def uniformity(self) -> float:
        values = list(self.max_ratio.values())
        return max(values) / min(values)


def default_cutoff_samples(n: int = 1, count: int = 400, seed: int = 7) -> list[tuple[float, HPoint]]:
    """Unit-scale samples with ``xi_1`` spread over ``[0.45, 1.05]`` and none near the origin."""
    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < count:
        t = rng.uniform(0.0, 0.4)
        target = rng.uniform(0.45, 1.05) - t
        if target <= 0.05:
            continue
        direction = rng.normal(size=2 * n)
        direction /= np.linalg.norm(direction)
        # split |eta|_H^2 = target between r^4 and tau^2
        angle = rng.uniform(0.0, math.pi)
        r = math.sqrt(target * abs(math.sin(angle)))
        tau = target * math.cos(angle)
        v = r * direction
        samples.append((t, HPoint(tuple(v[:n]), tuple(v[n:]), tau)))
    return samples


def cutoff_lemma_check(
    R_list: Sequence[float],
    p: float,
    samples: Sequence[tuple[float, HPoint]],
    rtol: float = 1e-4,
) -> CutoffCheck:
    """Max of ``R (|d_t phi_R| + |Delta_H phi_R|) / (phi*_R)^{1/p}`` per R.

    Samples are in units of R: ``(t, eta)`` is placed at ``(R t, delta_{sqrt R} eta)``.
    Where ``xi`` lies in ``[0.52, 0.98]`` the analytic sub-Laplacian is compared
    with second differences along left translations.

    Raises:
        NumericalError: the two sub-Laplacians disagree by more than ``rtol``.
    """
    if not samples:
        raise UsageError("cutoff_lemma_check needs samples")
    n = samples[0][1].n
    t_unit = np.array([t for t, _ in samples])
    x_unit = np.array([s.x for _, s in samples])
    y_unit = np.array([s.y for _, s in samples])
    tau_unit = np.array([s.tau for _, s in samples])
    ratios: dict[float, float] = {}
    worst = 0.0
    compared = 0
    for R in R_list:
        family = CutoffFamily(R, p, n)
        scale = math.sqrt(R)
        t, x, y, tau = R * t_unit, scale * x_unit, scale * y_unit, R * tau_unit
        star = family.phi_star(t, x, y, tau)
        lap = family.sublaplacian(t, x, y, tau)
        keep = star > 1e-8
        r = R * (np.abs(family.dt_phi(t, x, y, tau)) + np.abs(lap))
        ratios[float(R)] = float(np.max(r[keep] / star[keep] ** (1.0 / p))) if keep.any() else 0.0

        xi = family.xi(t, x, y, tau)
        band = (xi >= 0.52) & (xi <= 0.98)
        if band.any():
            fd = sublaplacian_at(
                lambda a, b, c, s=t[band]: family.phi(s, a, b, c),
                x[band], y[band], tau[band], step=1e-4 * scale,
            )
            exact = lap[band]
            floor = 1e-6 * float(np.abs(exact).max())
            gap = np.abs(fd - exact) / np.maximum(np.abs(exact), max(floor, 1e-300))
            worst = max(worst, float(gap.max()))
            compared += int(band.sum())
    if worst > rtol:
        raise NumericalError(f"analytic and difference sub-Laplacians disagree by {worst:.3e}")
    return CutoffCheck(max_ratio=ratios, max_disagreement=worst, compared=compared)


# -- capacity functional ------------------------------------------------------


@dataclass
class CapacityTrace:
    R: list[float]
    Y: list[float]
    rho: list[float]
    inner: list[float]
    total: float
    Rmax: float

    @property
    def bound(self) -> float:
        return math.log(2.0) * self.total

    def checks(self, slack: float = 0.05) -> list[CheckResult]:
        rises = [b - a for a, b in zip(self.Y, self.Y[1:])]
        worst_rise = max(rises, default=0.0)
        excess = max(self.Y, default=0.0) / self.bound if self.bound > 0 else 0.0
        return [
            CheckResult("capacity.monotone", worst_rise <= 1e-12 * max(self.total, 1e-300), worst_rise, 0.0),
            CheckResult("capacity.log2_bound", excess <= 1.0 + slack, excess, 1.0 + slack),
        ]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(("R", "Y"))
        for R, Y in zip(self.R, self.Y):
            writer.writerow((repr(R), repr(Y)))
        return buffer.getvalue()


def capacity_functional(
    run: EvolveResult,
    R_list: Sequence[float],
    p: float | None = None,
    rho_points: int = 400,
    Rmax: float | None = None,
) -> CapacityTrace:
    """``Y(R) = int_R^Rmax (int int u^p phi*_rho) drho / rho`` from stored snapshots.

    Time integrals use the trapezoid rule over snapshot times. ``phi*_rho``
    vanishes once ``rho > 2 (t + |eta|_H^2)``, so the default
    ``Rmax = 2 (T_end + max |eta|_H^2)`` loses nothing.
    """
    snaps = run.snapshots
    if len(snaps) < 2:
        raise UsageError("capacity_functional needs at least two snapshots")
    if not R_list or min(R_list) <= 0:
        raise UsageError("R values must be positive")
    p = run.trace.p if p is None else p
    spec = snaps[0][1].spec
    x, y, tau = spec.coordinate_arrays()
    N = norm_sq_arrays(x, y, tau).ravel()
    times = np.array([t for t, _ in snaps])
    tw = np.zeros(len(times))
    tw[:-1] += 0.5 * np.diff(times)
    tw[1:] += 0.5 * np.diff(times)

    s_all, m_all = [], []
    for w, (t, u) in zip(tw, snaps):
        mass = w * np.power(u.values.ravel(), p) * spec.cell_volume
        live = mass > 0
        s_all.append(t + N[live])
        m_all.append(mass[live])
    s = np.concatenate(s_all)
    m = np.concatenate(m_all)
    total = float(m.sum())
    if Rmax is None:
        Rmax = 2.0 * (times[-1] + float(N.max()))
    lo = min(R_list)
    rho = np.unique(np.concatenate((np.geomspace(lo, Rmax, rho_points), np.asarray(R_list, float))))
    rho = rho[rho <= Rmax]
    ell = 2.0 * p / (p - 1.0)
    inner = np.empty(rho.size)
    for i, value in enumerate(rho):
        xi = s / value
        band = (xi >= 0.5) & (xi <= 1.0)
        inner[i] = float(np.dot(m[band], smoothstep(xi[band])[0] ** ell))
    # Y at each rho: integral from rho to Rmax in log rho
    logs = np.log(rho)
    tail = integrate.cumulative_trapezoid(inner[::-1], -logs[::-1], initial=0.0)[::-1]
    Y = [float(np.interp(math.log(R), logs, tail)) if R <= Rmax else 0.0 for R in R_list]
    return CapacityTrace(
        R=[float(R) for R in R_list], Y=Y, rho=rho.tolist(), inner=inner.tolist(),
        total=total, Rmax=float(Rmax),
    )


# -- small data ---------------------------------------------------------------


@dataclass(frozen=True)
class SmallDataRow:
    eps: float
    absorbed_per_eps: float
    limit_mass_per_eps: float
    lower_bound_per_eps: float

    @property
    def bound_holds(self) -> bool:
        return self.limit_mass_per_eps >= self.lower_bound_per_eps * (1 - 1e-9) - 1e-12


def small_data_scan(
    u0: GridField,
    cfg: SolverConfig,
    k: AbsorptionProfile,
    eps_list: Sequence[float],
    workers: int = 1,
) -> list[SmallDataRow]:
    """Run ``eps * u0`` and compare the limit mass with ``eps (M0 - absorbed / eps)``.

    Masses are leak corrected. For ``p > 1 + 2/Q`` the absorbed share scales
    like ``eps^(p - 1)`` and vanishes as ``eps -> 0``.
    """
    rows = []
    m0 = integrate_field(u0)
    for eps in sorted(eps_list, reverse=True):
        if not eps > 0:
            raise UsageError(f"eps must be positive, got {eps}")
        trace = evolve(u0.scaled(eps), cfg, k, workers).trace
        absorbed = trace.final.absorbed_cum / eps
        rows.append(SmallDataRow(
            eps=eps,
            absorbed_per_eps=absorbed,
            limit_mass_per_eps=trace.final.corrected_mass / eps,
            lower_bound_per_eps=m0 - absorbed - mass_identity_residual(trace) / eps,
        ))
    return rows

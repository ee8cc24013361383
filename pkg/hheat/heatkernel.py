"""Heat kernel of the sub-Laplacian, group convolution and the heat semigroup.

The kernel is computed from its Fourier representation in the vertical
variable. For the vector fields ``X_i = d/dx_i - 2 y_i d/dtau`` the normalized
kernel is

    h_t(z, tau) = C_n * int_R (mu / sinh(t mu))^n exp(-|z|^2 mu / (4 tanh(t mu))) cos(mu tau / 4) dmu

with ``C_n = 1 / (8 pi (4 pi)^n)``. The ``"literal"`` convention evaluates the
textbook prefactor ``(2 pi)^-(n+2) 2^-n`` with ``cos(mu tau)`` instead; it
integrates to ``1 / (2 pi)`` on this group and is related to the normalized
kernel by ``h_t(z, tau) = (pi / 2) * h_literal_t(z, tau / 4)``.

Every evaluation is reduced to ``t = 1`` through
``h_t(z, tau) = t^-(n+1) h_1(z / sqrt(t), tau / t)``. The mu-integral is a
composite Gauss-Legendre rule on ``[0, Lambda]`` whose panels are narrow enough
that each sees at most a quarter period of the cosine; a second pass on halved
panels must agree to ``1e-9`` of the kernel scale.
"""

from __future__ import annotations

import logging
import math
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from .digest import cache_key
from .errors import InvariantViolation, NumericalError, QuadratureError, UsageError
from .field import (
    GridField,
    GridSpec,
    apply_horizontal_gradient,
    apply_vertical_derivative,
    integrate_field,
    interpolate_arrays,
    lp_norm,
)
from .hgroup import HPoint, norm_sq_arrays
from .report import CheckResult

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CONVENTIONS = ("group", "literal")

# Values in (-DUST, 0) are roundoff; anything below is an error.
DUST = 1e-12
REFINE_TOL = 1e-9
MAX_EXCURSION = 1e-12

# output indices along the first horizontal axis handled per convolution task
CONV_SLAB = 4


@dataclass(frozen=True)
class KernelQuadratureParams:
    """Composite Gauss-Legendre rule for the mu-integral.

    ``panels`` is the minimum number of panels on ``[0, Lambda]``; more are used
    when the cosine frequency demands it.
    """

    Lambda: float = 60.0
    panels: int = 120
    nodes_per_panel: int = 16
    refine_check: bool = True

    def __post_init__(self) -> None:
        if not self.Lambda > 0:
            raise UsageError(f"Lambda must be positive, got {self.Lambda}")
        if int(self.panels) != self.panels or self.panels < 1:
            raise UsageError(f"panels must be a positive integer, got {self.panels}")
        if int(self.nodes_per_panel) != self.nodes_per_panel or self.nodes_per_panel < 2:
            raise UsageError(
                f"nodes_per_panel must be an integer >= 2, got {self.nodes_per_panel}"
            )

    def panel_count(self, bmax: float) -> int:
        count = self.panels
        if bmax > 0:
            count = max(count, math.ceil(self.Lambda * 2.0 * bmax / math.pi))
        return int(count)

    def to_dict(self) -> dict[str, Any]:
        return {
            "Lambda": self.Lambda,
            "panels": self.panels,
            "nodes_per_panel": self.nodes_per_panel,
            "refine_check": self.refine_check,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> KernelQuadratureParams:
        return cls(
            Lambda=float(data.get("Lambda", 60.0)),
            panels=int(data.get("panels", 120)),
            nodes_per_panel=int(data.get("nodes_per_panel", 16)),
            refine_check=bool(data.get("refine_check", True)),
        )


DEFAULT_PARAMS = KernelQuadratureParams()


@lru_cache(maxsize=64)
def _composite_rule(Lambda: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_legendre(order)
    edges = np.linspace(0.0, Lambda, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _envelope(mu: np.ndarray, n: int) -> np.ndarray:
    """``(mu / sinh mu)^n`` with its limit 1 at mu = 0."""
    safe = np.where(mu == 0.0, 1.0, mu)
    return np.where(mu == 0.0, 1.0, safe / np.sinh(safe)) ** n


def _mu_coth(mu: np.ndarray) -> np.ndarray:
    """``mu / tanh mu`` with its limit 1 at mu = 0."""
    safe = np.where(mu == 0.0, 1.0, mu)
    return np.where(mu == 0.0, 1.0, safe / np.tanh(safe))


def _prefactor(n: int, convention: str) -> float:
    if convention == "group":
        return 1.0 / (8.0 * math.pi * (4.0 * math.pi) ** n)
    return (2.0 * math.pi) ** (-(n + 2)) * 2.0 ** (-n)


def _integral(
    n: int,
    a: np.ndarray,
    b: np.ndarray,
    nodes: np.ndarray,
    weights: np.ndarray,
    workers: int = 1,
) -> np.ndarray:
    """``2 * int_0^Lambda (mu/sinh mu)^n exp(-a mu coth mu) cos(b mu) dmu`` at pairs (a_i, b_i).

    Pairs are evaluated on the product of their distinct ``a`` and ``b`` values
    when that product is small, which is the case for grid samples.
    """
    env = _envelope(nodes, n) * weights
    mc = _mu_coth(nodes)
    a_u, a_inv = np.unique(a, return_inverse=True)
    b_u, b_inv = np.unique(b, return_inverse=True)
    size = a.size

    if a_u.size * b_u.size <= 4 * size + 65536:
        cosines = np.cos(nodes[:, None] * b_u[None, :])
        chunks = [(lo, min(lo + 64, a_u.size)) for lo in range(0, a_u.size, 64)]

        def rows(chunk: tuple[int, int]) -> np.ndarray:
            lo, hi = chunk
            G = env[None, :] * np.exp(-a_u[lo:hi, None] * mc[None, :])
            return G @ cosines

        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(rows, chunks))
        else:
            parts = [rows(c) for c in chunks]
        table = 2.0 * np.vstack(parts)
        return table[a_inv.ravel(), b_inv.ravel()].reshape(a.shape)

    flat_a = a.ravel()
    flat_b = b.ravel()
    out = np.empty(flat_a.size)
    for lo in range(0, flat_a.size, 256):
        hi = min(lo + 256, flat_a.size)
        integrand = env[None, :] * np.exp(-flat_a[lo:hi, None] * mc[None, :])
        integrand *= np.cos(flat_b[lo:hi, None] * nodes[None, :])
        out[lo:hi] = 2.0 * integrand.sum(axis=1)
    return out.reshape(a.shape)


def unit_kernel(
    n: int,
    a: np.ndarray,
    b: np.ndarray,
    params: KernelQuadratureParams | None = None,
    convention: str = "group",
    workers: int = 1,
) -> np.ndarray:
    """``h_1`` from ``a = |z|^2 / 4`` and the cosine frequency ``b``.

    Raises:
        QuadratureError: halved panels disagree by more than ``1e-9`` of ``h_1(0)``.
        NumericalError: a value below ``-1e-12``.
    """
    params = params or DEFAULT_PARAMS
    a = np.asarray(a, dtype=np.float64)
    b = np.abs(np.asarray(b, dtype=np.float64))
    if a.size == 0:
        return np.zeros(a.shape)
    bmax = float(b.max())
    panels = params.panel_count(bmax)
    nodes, weights = _composite_rule(params.Lambda, panels, params.nodes_per_panel)
    J = _integral(n, a, b, nodes, weights, workers)
    if params.refine_check:
        fine_nodes, fine_weights = _composite_rule(params.Lambda, 2 * panels, params.nodes_per_panel)
        J_fine = _integral(n, a, b, fine_nodes, fine_weights, workers)
        scale = 2.0 * float(np.sum(_envelope(fine_nodes, n) * fine_weights))
        gap = np.abs(J_fine - J)
        worst = int(np.argmax(gap))
        if gap.flat[worst] > REFINE_TOL * scale:
            raise QuadratureError(
                f"panel refinement disagrees by {gap.flat[worst]:.3e} "
                f"(scale {scale:.3e}) at a={a.flat[worst]!r}, b={b.flat[worst]!r}"
            )
        J = J_fine
        panels *= 2
    logger.debug("kernel quadrature: %d points, %d panels, bmax=%.3g", a.size, panels, bmax)
    h = _prefactor(n, convention) * J
    low = float(h.min())
    if low <= -DUST:
        raise NumericalError(f"kernel quadrature produced {low:.3e} < 0")
    return np.where(h < 0.0, 0.0, h)


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise UsageError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def kernel_values(
    n: int,
    t: float,
    r2: np.ndarray,
    tau: np.ndarray,
    params: KernelQuadratureParams | None = None,
    convention: str = "group",
    workers: int = 1,
) -> np.ndarray:
    """``h_t`` at points given by ``r2 = |x|^2 + |y|^2`` and ``tau``."""
    if not t > 0:
        raise UsageError(f"t must be positive, got {t}")
    _check_convention(convention)
    r2 = np.asarray(r2, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    vertical = 0.25 if convention == "group" else 1.0
    a = r2 / (4.0 * t)
    b = np.abs(tau) / t * vertical
    return unit_kernel(n, a, b, params, convention, workers) * t ** (-(n + 1))


def kernel_value(
    n: int,
    t: float,
    p: HPoint,
    params: KernelQuadratureParams | None = None,
    convention: str = "group",
) -> float:
    """Heat kernel ``h_t(p)`` of ``H^n``."""
    if p.n != n:
        raise UsageError(f"point has n={p.n}, expected {n}")
    return float(kernel_values(n, t, np.array([p.r2()]), np.array([p.tau]), params, convention)[0])


# -- sampled kernels ----------------------------------------------------------

_SAMPLES: OrderedDict[tuple, GridField] = OrderedDict()
_SAMPLES_LOCK = threading.Lock()
_SAMPLES_MAX = 24


def sample_kernel(
    spec: GridSpec,
    t: float,
    params: KernelQuadratureParams | None = None,
    workers: int = 1,
) -> GridField:
    """``h_t`` at the nodes of ``spec`` (memoized)."""
    params = params or DEFAULT_PARAMS
    key = (spec, float(t), params)
    with _SAMPLES_LOCK:
        if key in _SAMPLES:
            _SAMPLES.move_to_end(key)
            return _SAMPLES[key]
    x, y, tau = spec.coordinate_arrays()
    r2 = np.sum(x * x, axis=-1) + np.sum(y * y, axis=-1)
    values = kernel_values(spec.n, t, r2, tau, params, workers=workers)
    field = GridField(spec, values, nonnegative=True)
    with _SAMPLES_LOCK:
        _SAMPLES[key] = field
        while len(_SAMPLES) > _SAMPLES_MAX:
            _SAMPLES.popitem(last=False)
    return field


def cell_average_kernel(
    spec: GridSpec,
    t: float,
    params: KernelQuadratureParams | None = None,
    workers: int = 1,
) -> GridField:
    """Cell averages of ``h_t`` by a 2-point Gauss rule on every axis."""
    x, y, tau = spec.coordinate_arrays()
    n = spec.n
    offset = 0.5 / math.sqrt(3.0)
    total = np.zeros(spec.shape)
    corners = 0
    for signs in np.ndindex(*(2,) * spec.ndim):
        s = np.array(signs) * 2.0 - 1.0
        xs = x + s[:n] * offset * spec.hx
        ys = y + s[n:2 * n] * offset * spec.hy
        ts = tau + s[-1] * offset * spec.htau
        r2 = np.sum(xs * xs, axis=-1) + np.sum(ys * ys, axis=-1)
        total += kernel_values(n, t, r2, ts, params, workers=workers)
        corners += 1
    return GridField(spec, total / corners, nonnegative=True)


def tail_mass_estimate(spec: GridSpec, t: float = 1.0) -> float:
    """Estimated mass of ``h_t`` outside the box.

    Horizontal marginals are Gaussian with variance ``2t`` per coordinate; the
    vertical marginal has Fourier transform ``sech^n``. The box fractions are
    multiplied as if the marginals were independent.
    """
    n = spec.n
    horizontal = special.erf(spec.Lx / (2.0 * math.sqrt(t))) ** n
    horizontal *= special.erf(spec.Ly / (2.0 * math.sqrt(t))) ** n
    c = spec.Ltau / t
    w = c / 4.0
    nodes, weights = _composite_rule(60.0, DEFAULT_PARAMS.panel_count(w), 16)
    # (1/pi) int_R sech^n(mu) sin(w mu) / mu dmu
    vertical = (2.0 / math.pi) * float(
        np.sum(weights * np.cosh(nodes) ** (-n) * w * np.sinc(w * nodes / math.pi))
    )
    return float(1.0 - horizontal * min(vertical, 1.0))


# -- the table ---------------------------------------------------------------


@dataclass
class KernelTable:
    """``h_1`` on a grid plus the quadrature that produced it."""

    n: int
    spec: GridSpec
    params: KernelQuadratureParams
    values: GridField

    @property
    def key(self) -> str:
        return table_key(self.n, self.spec, self.params)

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    def value(self, t: float, p: HPoint) -> float:
        return kernel_value(self.n, t, p, self.params)

    def sample(self, t: float, spec: GridSpec | None = None, workers: int = 1) -> GridField:
        """``h_t`` at the nodes of ``spec`` (the table's own grid by default)."""
        spec = spec or self.spec
        if t == 1.0 and spec == self.spec:
            return self.values
        return sample_kernel(spec, t, self.params, workers)

    def dilated(self, t: float, spec: GridSpec | None = None) -> GridField:
        """``h_t = t^{-Q/2} h_1(delta_{1/sqrt t} .)`` at the nodes of ``spec``.

        ``h_1`` is read from the stored values by multilinear interpolation,
        zero outside the table box; no quadrature runs.
        """
        if not t > 0:
            raise UsageError(f"t must be positive, got {t}")
        spec = spec or self.spec
        if spec.n != self.n:
            raise UsageError(f"grid has n={spec.n}, table has n={self.n}")
        x, y, tau = spec.coordinate_arrays()
        s = 1.0 / math.sqrt(t)
        coords = np.concatenate(
            (x.reshape(-1, self.n) * s, y.reshape(-1, self.n) * s, tau.reshape(-1, 1) / t), axis=1
        )
        values = interpolate_arrays(self.values, coords).reshape(spec.shape) * t ** (-self.Q / 2)
        return GridField(spec, values, nonnegative=True)

    def cell_averages(self, t: float, spec: GridSpec | None = None, workers: int = 1) -> GridField:
        return cell_average_kernel(spec or self.spec, t, self.params, workers)

    def checks(self) -> list[CheckResult]:
        """Positivity, normalization and symmetry of the stored values."""
        v = self.values.values
        low = float(v.min())
        mass = integrate_field(self.values)
        tail = tail_mass_estimate(self.spec)
        inner = v[(slice(1, None),) * v.ndim]
        asym = float(np.abs(inner - inner[(slice(None, None, -1),) * v.ndim]).max())
        return [
            CheckResult("kernel.positivity", low >= 0.0, low, 0.0),
            CheckResult("kernel.normalization", abs(mass - 1.0) <= 1e-2, abs(mass - 1.0), 1e-2),
            CheckResult(
                "kernel.normalization_tail_corrected",
                abs(mass + tail - 1.0) <= 2e-3,
                abs(mass + tail - 1.0),
                2e-3,
            ),
            CheckResult("kernel.symmetry", asym <= 1e-12, asym, 1e-12),
        ]

    def verify(self) -> tuple[bool, str | None]:
        """Returns (True, None) if every check passes, else (False, first_failed_name)."""
        for check in self.checks():
            if not check.passed:
                return False, check.name
        return True, None

    def header(self) -> dict[str, Any]:
        return {
            "kind": "kernel",
            "version": FORMAT_VERSION,
            "n": self.n,
            "grid": self.spec.to_dict(),
            "quadrature": self.params.to_dict(),
        }


def table_key(n: int, spec: GridSpec, params: KernelQuadratureParams) -> str:
    return cache_key(
        "kernel",
        {
            "n": n,
            "grid": spec.to_dict(),
            "quadrature": params.to_dict(),
            "version": FORMAT_VERSION,
        },
    )


def tabulate_kernel(
    n: int,
    spec: GridSpec,
    params: KernelQuadratureParams | None = None,
    cache: Any | None = None,
    workers: int = 1,
) -> KernelTable:
    """Tabulate ``h_1`` on ``spec``, via ``cache`` (a :class:`~hheat.storage.KernelCache`) when given.

    Raises:
        InvariantViolation: a table check failed; ``name`` identifies it.
    """
    if spec.n != n:
        raise UsageError(f"grid has n={spec.n}, expected {n}")
    params = params or DEFAULT_PARAMS
    key = table_key(n, spec, params)
    if cache is not None and cache.exists(key):
        table = cache.load(key)
        logger.info("kernel table %s loaded from cache", key)
    else:
        values = sample_kernel(spec, 1.0, params, workers)
        table = KernelTable(n=n, spec=spec, params=params, values=values)
        logger.info("kernel table %s tabulated on %s", key, spec.shape)
        if cache is not None:
            cache.save(table)
    for check in table.checks():
        if not check.passed:
            raise InvariantViolation(
                check.name, f"measured {check.measured:.3e}, tolerance {check.tolerance:.1e}"
            )
    return table


# -- convolution --------------------------------------------------------------


def _gather(c: np.ndarray, idx: np.ndarray) -> np.ndarray:
    valid = (idx >= 0) & (idx < c.shape[1])
    vals = np.take_along_axis(c, np.clip(idx, 0, c.shape[1] - 1), axis=1)
    return np.where(valid, vals, 0.0)


def _convolve_slab(
    fv: np.ndarray,
    gv: np.ndarray,
    spec: GridSpec,
    sources: Sequence[tuple[int, ...]],
    lo: int,
    hi: int,
) -> np.ndarray:
    n = spec.n
    K = spec.Ntau
    hshape = spec.shape[:-1]
    H = 2 * n
    half = [N // 2 for N in hshape]
    nodes = [spec.axis_nodes(a) for a in range(H)]
    pad = np.zeros(K - 1)
    ks = np.arange(K)
    out = np.zeros((hi - lo,) + spec.shape[1:])

    for s in sources:
        start, stop = [], []
        for a in range(H):
            st = max(0, s[a] - half[a])
            sp = min(hshape[a], s[a] - half[a] + hshape[a])
            if a == 0:
                st, sp = max(st, lo), min(sp, hi)
            if st >= sp:
                break
            start.append(st)
            stop.append(sp)
        else:
            f_block = fv[tuple(
                slice(st - s[a] + half[a], sp - s[a] + half[a])
                for a, (st, sp) in enumerate(zip(start, stop))
            )]
            block_shape = f_block.shape[:-1]
            # T[a, m] = g[m - a]
            T = np.ascontiguousarray(
                sliding_window_view(np.concatenate((pad, gv[s], pad)), 2 * K - 1)[::-1]
            )
            c = f_block.reshape(-1, K) @ T

            sigma = np.zeros(block_shape)
            for i in range(n):
                xo = nodes[i][start[i]:stop[i]].reshape([-1 if ax == i else 1 for ax in range(H)])
                yo = nodes[n + i][start[n + i]:stop[n + i]].reshape(
                    [-1 if ax == n + i else 1 for ax in range(H)]
                )
                sigma = sigma - 2.0 * (xo * nodes[n + i][s[n + i]] - nodes[i][s[i]] * yo)
            shift = sigma.ravel() / spec.htau
            nearest = np.round(shift)
            on_node = np.abs(shift - nearest) <= 1e-9
            q = np.where(on_node, nearest, np.floor(shift))
            r = np.where(on_node, 0.0, shift - q)
            idx = ks[None, :] + (K // 2) + q.astype(np.int64)[:, None]
            contrib = (1.0 - r)[:, None] * _gather(c, idx) + r[:, None] * _gather(c, idx + 1)

            target = (slice(start[0] - lo, stop[0] - lo),) + tuple(
                slice(st, sp) for st, sp in zip(start[1:], stop[1:])
            )
            out[target] += contrib.reshape(block_shape + (K,))
    return out


def group_convolve(f: GridField, g: GridField, workers: int = 1) -> GridField:
    """``(f * g)(eta) = sum_xi f(eta o xi^-1) g(xi) dV``.

    ``f`` is read at the sheared vertical coordinate by linear interpolation;
    horizontal differences are always nodes. Each output element sums its
    sources in a fixed order, so the result does not depend on ``workers``.
    """
    if f.spec != g.spec:
        raise UsageError(f"grid mismatch: {f.spec} vs {g.spec}")
    spec = f.spec
    K = spec.Ntau
    hshape = spec.shape[:-1]
    columns = g.values.reshape(-1, K)
    active = np.flatnonzero(np.any(columns != 0.0, axis=1))
    sources = [tuple(int(i) for i in np.unravel_index(j, hshape)) for j in active]
    out = np.zeros(spec.shape)
    if not sources:
        return GridField(spec, out)

    slabs = [(lo, min(lo + CONV_SLAB, hshape[0])) for lo in range(0, hshape[0], CONV_SLAB)]

    def run(slab: tuple[int, int]) -> None:
        lo, hi = slab
        out[lo:hi] = _convolve_slab(f.values, g.values, spec, sources, lo, hi)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, slabs))
    else:
        for slab in slabs:
            run(slab)
    logger.debug("group_convolve: %d source columns, %d slabs", len(sources), len(slabs))
    return GridField(spec, out * spec.cell_volume)


def _clamp_to_range(out: GridField, reference: GridField) -> GridField:
    """Clip roundoff excursions outside ``[0, max reference]`` for nonnegative data."""
    ref = reference.values
    if ref.size == 0 or ref.min() < 0.0:
        return out
    top = float(ref.max())
    v = out.values
    tol = MAX_EXCURSION * top
    low, high = float(v.min()), float(v.max())
    if low < -tol:
        raise InvariantViolation("positivity", f"semigroup output min {low:.3e}")
    if high > top + tol:
        raise InvariantViolation(
            "maximum_principle", f"semigroup output max {high!r} exceeds input max {top!r}"
        )
    return GridField(out.spec, np.clip(v, 0.0, top), nonnegative=True)


def heat_semigroup_apply(
    f: GridField,
    t: float,
    params: KernelQuadratureParams | None = None,
    workers: int = 1,
    table: KernelTable | None = None,
) -> GridField:
    """``S(t) f = h_t * f``.

    With ``table``, ``h_t`` comes from the tabulated ``h_1`` by the scaling
    law instead of a fresh quadrature. The kernel is scaled down when its
    discrete mass exceeds 1, so the step never creates mass and respects the
    maximum principle exactly.
    """
    if not t > 0:
        raise UsageError(f"t must be positive, got {t}")
    kernel = table.dilated(t, f.spec) if table is not None else sample_kernel(f.spec, t, params, workers)
    mass = integrate_field(kernel)
    if mass > 1.0:
        kernel = kernel.scaled(1.0 / mass)
    return _clamp_to_range(group_convolve(kernel, f, workers), f)


# -- bound and decay checks ---------------------------------------------------


@dataclass(frozen=True)
class GaussianBounds:
    """``c_low t^-Q/2 e^{-C_low rho} <= h_t <= C_up t^-Q/2 e^{-c_up rho}``, ``rho = |eta|_H^2 / t``."""

    c_low: float
    C_low: float
    c_up: float
    C_up: float
    samples: int

    def holds(self, scaled_value: float, rho: float, rtol: float = 1e-12) -> bool:
        upper = self.C_up * math.exp(-self.c_up * rho)
        lower = self.c_low * math.exp(-self.C_low * rho)
        return lower * (1 - rtol) <= scaled_value <= upper * (1 + rtol)

    def to_dict(self) -> dict[str, Any]:
        return {
            "c_low": self.c_low,
            "C_low": self.C_low,
            "c_up": self.c_up,
            "C_up": self.C_up,
            "samples": self.samples,
        }


def scaled_samples(
    n: int,
    samples: Sequence[tuple[float, HPoint]],
    params: KernelQuadratureParams | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """``(h_t(eta) t^{Q/2}, |eta|_H^2 / t)`` for each sample."""
    ts = np.array([t for t, _ in samples], dtype=np.float64)
    r2 = np.array([p.r2() for _, p in samples])
    tau = np.array([p.tau for _, p in samples])
    values = unit_kernel(n, r2 / (4.0 * ts), np.abs(tau) / ts * 0.25, params)
    rho = np.hypot(r2, tau) / ts
    return values, rho


def gaussian_bound_fit(
    table: KernelTable,
    samples: Sequence[tuple[float, HPoint]],
) -> GaussianBounds:
    """Tightest Gaussian constants consistent with every sample.

    ``C_up`` is ``h_1(0)``, the maximum of ``h_t t^{Q/2}``.
    """
    if not samples:
        raise UsageError("gaussian_bound_fit needs at least one sample")
    spec = table.spec
    for t, p in samples:
        if not 0.25 <= t <= 4.0:
            raise UsageError(f"sample time {t} outside [0.25, 4]")
        if (max(abs(v) for v in p.x) > spec.Lx or max(abs(v) for v in p.y) > spec.Ly
                or abs(p.tau) > spec.Ltau):
            raise UsageError(f"sample {p.coords()} outside the tabulated box")
    values, rho = scaled_samples(table.n, samples, table.params)
    if np.any(values <= 0.0):
        worst = int(np.argmin(values))
        raise NumericalError(
            f"kernel not positive at sample {worst}: t={samples[worst][0]}, value={values[worst]!r}"
        )
    C_up = float(unit_kernel(table.n, np.zeros(1), np.zeros(1), table.params)[0])
    away = rho > 0
    if not away.any():
        raise UsageError("gaussian_bound_fit needs a sample away from the origin")
    decay = np.log(C_up / values[away]) / rho[away]
    c_up = float(decay.min())
    C_low = float(decay.max())
    c_low = float(np.min(values * np.exp(C_low * rho)))
    return GaussianBounds(c_low=c_low, C_low=C_low, c_up=c_up, C_up=C_up, samples=len(samples))


def fit_slope(ts: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log t``."""
    return float(np.polyfit(np.log(np.asarray(ts)), np.log(np.asarray(ys)), 1)[0])


@dataclass(frozen=True)
class GradientDecay:
    ts: tuple[float, ...]
    horizontal_l1: tuple[float, ...]
    vertical_l1: tuple[float, ...]
    horizontal_slope: float
    vertical_slope: float

    @property
    def slope(self) -> float:
        return self.horizontal_slope


def gradient_l1_check(
    table: KernelTable,
    t_list: Sequence[float],
    spec: GridSpec | None = None,
    workers: int = 1,
) -> GradientDecay:
    """L1 norms of ``|grad_H h_t|`` (Euclidean over its 2n components) and of ``T h_t``."""
    if len(t_list) < 2:
        raise UsageError("gradient_l1_check needs at least two times")
    for t in t_list:
        if not 0.5 <= t <= 8.0:
            raise UsageError(f"t={t} outside [0.5, 8]")
    spec = spec or table.spec
    grads, verts = [], []
    for t in t_list:
        h = table.sample(t, spec, workers)
        comps = apply_horizontal_gradient(h)
        modulus = np.sqrt(sum(c.values ** 2 for c in comps))
        grads.append(float(modulus.sum() * spec.cell_volume))
        verts.append(lp_norm(apply_vertical_derivative(h), 1))
    return GradientDecay(
        ts=tuple(float(t) for t in t_list),
        horizontal_l1=tuple(grads),
        vertical_l1=tuple(verts),
        horizontal_slope=fit_slope(t_list, grads),
        vertical_slope=fit_slope(t_list, verts),
    )


def linf_decay(
    f: GridField,
    t_list: Sequence[float],
    params: KernelQuadratureParams | None = None,
    workers: int = 1,
) -> tuple[float, list[float]]:
    """Slope of ``log ||S(t) f||_inf`` against ``log t`` and the norms themselves."""
    norms = [lp_norm(heat_semigroup_apply(f, t, params, workers), math.inf) for t in t_list]
    return fit_slope(t_list, norms), norms


def spike(spec: GridSpec, mass: float = 1.0) -> GridField:
    """Single-node field at the origin with the given integral."""
    values = np.zeros(spec.shape)
    values[tuple(N // 2 for N in spec.shape)] = mass / spec.cell_volume
    return GridField(spec, values, nonnegative=mass >= 0)

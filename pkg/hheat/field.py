"""Sampled fields on a rectangular (x, y, tau) box and the discrete horizontal calculus.

Each axis of half-width ``L`` carries ``N`` nodes ``(i - N/2) * h`` with
``h = 2L / N``. The origin is a node, node differences are nodes, and every node
owns one cell of the box, so the rectangle rule integrates constants exactly.
Values beyond the outermost nodes are taken to be zero.

Array layout is ``(Nx,)*n + (Ny,)*n + (Ntau,)`` in C order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import NumericalError, UsageError
from .hgroup import HPoint

MIN_POINTS = 8


@dataclass(frozen=True)
class GridSpec:
    """Discretization of a box in H^n."""

    n: int
    Lx: float
    Ly: float
    Ltau: float
    Nx: int
    Ny: int
    Ntau: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise UsageError(f"n must be >= 1, got {self.n}")
        for name in ("Lx", "Ly", "Ltau"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise UsageError(f"{name} must be a positive real, got {value}")
            object.__setattr__(self, name, float(value))
        for name in ("Nx", "Ny", "Ntau"):
            value = getattr(self, name)
            if int(value) != value or value < MIN_POINTS or value % 2:
                raise UsageError(f"{name} must be an even integer >= {MIN_POINTS}, got {value}")
            object.__setattr__(self, name, int(value))

    # -- presets ---------------------------------------------------------------

    @classmethod
    def default(cls, n: int = 1) -> GridSpec:
        """Box for h_1 with spacings 0.5 in every direction."""
        if n == 1:
            return cls(1, 8.0, 8.0, 40.0, 32, 32, 160)
        return cls(n, 6.0, 6.0, 24.0, 16, 16, 64)

    @classmethod
    def wide(cls, n: int = 1) -> GridSpec:
        """Coarse box for long solver runs (T_end ~ 20)."""
        return cls(n, 20.0, 20.0, 240.0, 20, 20, 180)

    @classmethod
    def compact(cls, n: int = 1) -> GridSpec:
        """Small box for quick solver checks up to t ~ 4."""
        return cls(n, 12.0, 12.0, 72.0, 24, 24, 144)

    # -- derived ---------------------------------------------------------------

    @property
    def hx(self) -> float:
        return 2.0 * self.Lx / self.Nx

    @property
    def hy(self) -> float:
        return 2.0 * self.Ly / self.Ny

    @property
    def htau(self) -> float:
        return 2.0 * self.Ltau / self.Ntau

    @property
    def cell_volume(self) -> float:
        return self.hx ** self.n * self.hy ** self.n * self.htau

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.Nx,) * self.n + (self.Ny,) * self.n + (self.Ntau,)

    @property
    def ndim(self) -> int:
        return 2 * self.n + 1

    @property
    def spacings(self) -> tuple[float, ...]:
        return (self.hx,) * self.n + (self.hy,) * self.n + (self.htau,)

    @property
    def counts(self) -> tuple[int, ...]:
        return self.shape

    @property
    def box_volume(self) -> float:
        return (2 * self.Lx) ** self.n * (2 * self.Ly) ** self.n * (2 * self.Ltau)

    @property
    def lattice_ratio(self) -> float:
        """``2 hx hy / htau``; an integer makes the group shear land on tau nodes."""
        return 2.0 * self.hx * self.hy / self.htau

    @property
    def lattice_compatible(self) -> bool:
        m = self.lattice_ratio
        return abs(m - round(m)) <= 1e-9 * max(1.0, m)

    def axis_nodes(self, axis: int) -> np.ndarray:
        """Node coordinates along array axis ``axis``."""
        N = self.shape[axis]
        return (np.arange(N) - N // 2) * self.spacings[axis]

    def coordinate_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable ``(x, y, tau)``; ``x``/``y`` carry a trailing axis of length n."""
        d = self.ndim
        grids = []
        for axis in range(d):
            shape = [1] * d
            shape[axis] = self.shape[axis]
            grids.append(np.broadcast_to(self.axis_nodes(axis).reshape(shape), self.shape))
        x = np.stack(grids[: self.n], axis=-1)
        y = np.stack(grids[self.n: 2 * self.n], axis=-1)
        return x, y, np.array(grids[-1])

    def node_point(self, index: tuple[int, ...]) -> HPoint:
        coords = [self.axis_nodes(a)[i] for a, i in enumerate(index)]
        return HPoint.from_coords(coords)

    def refined(self, factor: int = 2, axes: str = "xyt") -> GridSpec:
        """Same box with the point counts on the named axes multiplied by ``factor``."""
        return GridSpec(
            self.n, self.Lx, self.Ly, self.Ltau,
            self.Nx * factor if "x" in axes else self.Nx,
            self.Ny * factor if "y" in axes else self.Ny,
            self.Ntau * factor if "t" in axes else self.Ntau,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "Lx": self.Lx,
            "Ly": self.Ly,
            "Ltau": self.Ltau,
            "Nx": self.Nx,
            "Ny": self.Ny,
            "Ntau": self.Ntau,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GridSpec:
        return cls(
            n=int(data["n"]),
            Lx=data["Lx"],
            Ly=data["Ly"],
            Ltau=data["Ltau"],
            Nx=data["Nx"],
            Ny=data["Ny"],
            Ntau=data["Ntau"],
        )


class GridField:
    """Immutable array of samples on a :class:`GridSpec`."""

    __slots__ = ("spec", "values", "nonnegative")

    def __init__(self, spec: GridSpec, values: np.ndarray, nonnegative: bool = False) -> None:
        arr = np.array(values, dtype=np.float64)
        if arr.shape != spec.shape:
            raise UsageError(f"values shape {arr.shape} does not match grid {spec.shape}")
        if not np.all(np.isfinite(arr)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
            raise NumericalError(f"non-finite value at node {bad}")
        if nonnegative and arr.size and arr.min() < 0:
            raise UsageError(f"field flagged nonnegative has min {arr.min()!r}")
        arr.setflags(write=False)
        self.spec = spec
        self.values = arr
        self.nonnegative = nonnegative

    @classmethod
    def zeros(cls, spec: GridSpec) -> GridField:
        return cls(spec, np.zeros(spec.shape), nonnegative=True)

    def with_values(self, values: np.ndarray, nonnegative: bool | None = None) -> GridField:
        flag = self.nonnegative if nonnegative is None else nonnegative
        return GridField(self.spec, values, nonnegative=flag)

    def scaled(self, c: float) -> GridField:
        return GridField(self.spec, self.values * c, nonnegative=self.nonnegative and c >= 0)

    def __repr__(self) -> str:
        return f"GridField(shape={self.values.shape}, nonnegative={self.nonnegative})"


def _require_same_spec(u: GridField, v: GridField) -> None:
    if u.spec != v.spec:
        raise UsageError(f"grid mismatch: {u.spec} vs {v.spec}")


# -- sampling and integrals ---------------------------------------------------


def sample_function(spec: GridSpec, f: Callable[[HPoint], float]) -> GridField:
    """Evaluate a pointwise function at every node."""
    axes = [spec.axis_nodes(a) for a in range(spec.ndim)]
    values = np.empty(spec.shape)
    for index in np.ndindex(*spec.shape):
        values[index] = f(HPoint.from_coords([axes[a][i] for a, i in enumerate(index)]))
    _raise_on_nan(spec, values)
    return GridField(spec, values)


def sample_array(
    spec: GridSpec,
    f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    nonnegative: bool = False,
) -> GridField:
    """Vectorized :func:`sample_function`: ``f(x, y, tau)`` on coordinate arrays."""
    x, y, tau = spec.coordinate_arrays()
    values = np.broadcast_to(np.asarray(f(x, y, tau), dtype=np.float64), spec.shape).copy()
    _raise_on_nan(spec, values)
    return GridField(spec, values, nonnegative=nonnegative)


def _raise_on_nan(spec: GridSpec, values: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NumericalError(
            f"function is not finite at node {index} = {spec.node_point(index).coords()}"
        )


def integrate_field(u: GridField) -> float:
    """Rectangle-rule integral."""
    return float(u.values.sum() * u.spec.cell_volume)


def lp_norm(u: GridField, p: float) -> float:
    if p == math.inf:
        return float(np.abs(u.values).max())
    if not p >= 1:
        raise UsageError(f"lp_norm needs p >= 1 or inf, got {p}")
    a = np.abs(u.values)
    if p == 1:
        return float(a.sum() * u.spec.cell_volume)
    if p == 2:
        return float(math.sqrt(np.vdot(a, a) * u.spec.cell_volume))
    return float((np.power(a, p).sum() * u.spec.cell_volume) ** (1.0 / p))


def lp_power(u: GridField, p: float) -> float:
    """``||u||_p^p``, the quantity the absorption bookkeeping needs."""
    return float(np.power(np.abs(u.values), p).sum() * u.spec.cell_volume)


# -- horizontal calculus ------------------------------------------------------


def _d1(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    return np.gradient(a, h, axis=axis, edge_order=2)


def _d2(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative: 3-point centered, 4-point one-sided at the faces."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = a[2:] - 2.0 * a[1:-1] + a[:-2]
    out[0] = 2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]
    out[-1] = 2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]
    return np.moveaxis(out / (h * h), 0, axis)


def apply_vertical_derivative(u: GridField) -> GridField:
    """``T u = d/dtau u``."""
    spec = u.spec
    return GridField(spec, _d1(u.values, spec.htau, spec.ndim - 1))


def apply_horizontal_gradient(u: GridField) -> list[GridField]:
    """``[X_1 u, ..., X_n u, Y_1 u, ..., Y_n u]`` with
    ``X_i = d/dx_i - 2 y_i d/dtau`` and ``Y_i = d/dy_i + 2 x_i d/dtau``."""
    spec = u.spec
    n = spec.n
    x, y, _ = spec.coordinate_arrays()
    dtau = _d1(u.values, spec.htau, 2 * n)
    xs = [
        GridField(spec, _d1(u.values, spec.hx, i) - 2.0 * y[..., i] * dtau)
        for i in range(n)
    ]
    ys = [
        GridField(spec, _d1(u.values, spec.hy, n + i) + 2.0 * x[..., i] * dtau)
        for i in range(n)
    ]
    return xs + ys


def apply_sublaplacian(u: GridField) -> GridField:
    """``Delta_H u = sum_i (X_i^2 + Y_i^2) u`` expanded in coordinates:

    ``Delta_x u + Delta_y u + 4 r^2 u_tautau + 4 sum_i (x_i u_{y_i tau} - y_i u_{x_i tau})``
    """
    spec = u.spec
    n = spec.n
    a = u.values
    x, y, _ = spec.coordinate_arrays()
    r2 = np.sum(x * x, axis=-1) + np.sum(y * y, axis=-1)
    t_axis = 2 * n
    out = 4.0 * r2 * _d2(a, spec.htau, t_axis)
    dtau = _d1(a, spec.htau, t_axis)
    for i in range(n):
        out += _d2(a, spec.hx, i) + _d2(a, spec.hy, n + i)
        out += 4.0 * x[..., i] * _d1(dtau, spec.hy, n + i)
        out -= 4.0 * y[..., i] * _d1(dtau, spec.hx, i)
    return GridField(spec, out)


def sublaplacian_at(
    f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    tau: np.ndarray,
    step: float,
) -> np.ndarray:
    """Pointwise ``Delta_H f`` by second differences along left translations.

    ``s -> f(eta o (s e))`` has derivative ``X f`` for the left-invariant field
    matching the unit vector ``e``, so the centered second difference along
    each horizontal direction gives ``X_i^2 f`` and ``Y_i^2 f`` to O(step^2).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    n = x.shape[-1]
    centre = f(x, y, tau)
    total = np.zeros_like(centre)
    for i in range(2 * n):
        for sign in (1.0, -1.0):
            dx = np.zeros_like(x)
            dy = np.zeros_like(y)
            if i < n:
                dx[..., i] = sign * step
            else:
                dy[..., i - n] = sign * step
            # eta o (dx, dy, 0)
            twist = np.sum(x * dy - dx * y, axis=-1)
            total = total + f(x + dx, y + dy, tau + 2.0 * twist)
        total = total - 2.0 * centre
    return total / (step * step)


# -- interpolation ------------------------------------------------------------


def interpolate(u: GridField, p: HPoint) -> float:
    """Multilinear interpolation with zero extension outside the box."""
    if p.n != u.spec.n:
        raise UsageError(f"point has n={p.n}, grid has n={u.spec.n}")
    coords = np.asarray(p.coords(), dtype=np.float64)
    return float(interpolate_arrays(u, coords[None, :])[0])


def interpolate_arrays(u: GridField, coords: np.ndarray) -> np.ndarray:
    """Interpolate at many points; ``coords`` has shape ``(M, 2n+1)``."""
    spec = u.spec
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    d = spec.ndim
    lower, weights = [], []
    for axis in range(d):
        N = spec.shape[axis]
        s = coords[:, axis] / spec.spacings[axis] + N // 2
        i0 = np.floor(s)
        lower.append(i0.astype(np.int64))
        weights.append(s - i0)
    out = np.zeros(coords.shape[0])
    for corner in itertools.product((0, 1), repeat=d):
        w = np.ones(coords.shape[0])
        valid = np.ones(coords.shape[0], dtype=bool)
        index = []
        for axis, bit in enumerate(corner):
            idx = lower[axis] + bit
            valid &= (idx >= 0) & (idx < spec.shape[axis])
            w = w * (weights[axis] if bit else 1.0 - weights[axis])
            index.append(np.clip(idx, 0, spec.shape[axis] - 1))
        out += np.where(valid, w * u.values[tuple(index)], 0.0)
    return out


def subtract(u: GridField, v: GridField) -> GridField:
    """``u - v`` on a shared grid."""
    _require_same_spec(u, v)
    return GridField(u.spec, u.values - v.values)

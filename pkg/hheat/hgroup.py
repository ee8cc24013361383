"""Heisenberg group H^n: points, group law, dilations and the Korányi gauge.

A point is ``(x, y, tau)`` with ``x, y`` in R^n and ``tau`` real. The law is

    (x, y, tau) o (x', y', tau') = (x + x', y + y', tau + tau' + 2(x.y' - x'.y))

so the inverse is the negation and ``delta_lam(x, y, tau) = (lam x, lam y, lam^2 tau)``
is an automorphism with Jacobian ``lam**Q``, ``Q = 2n + 2``.

The array helpers at the bottom work on coordinate arrays with a trailing axis
of length n and are what the grid and Monte Carlo code use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class GroupDim:
    """Dimension data of H^n."""

    n: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise UsageError(f"n must be a positive integer, got {self.n!r}")

    @property
    def Q(self) -> int:
        """Homogeneous dimension."""
        return 2 * self.n + 2

    @property
    def critical_exponent(self) -> float:
        return 1.0 + 2.0 / self.Q


@dataclass(frozen=True)
class HPoint:
    """A point of H^n."""

    x: tuple[float, ...]
    y: tuple[float, ...]
    tau: float

    def __post_init__(self) -> None:
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "tau", float(self.tau))
        if len(x) < 1 or len(x) != len(y):
            raise UsageError(
                f"x and y must have equal length n >= 1, got {len(x)} and {len(y)}"
            )
        if not all(math.isfinite(v) for v in (*x, *y, self.tau)):
            raise UsageError(f"coordinates must be finite, got {self!r}")

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def origin(cls, n: int = 1) -> HPoint:
        return cls((0.0,) * n, (0.0,) * n, 0.0)

    @classmethod
    def from_coords(cls, coords: Sequence[float]) -> HPoint:
        """Build from a flat ``(x_1..x_n, y_1..y_n, tau)`` sequence."""
        if len(coords) < 3 or len(coords) % 2 == 0:
            raise UsageError(
                f"expected 2n+1 coordinates, got {len(coords)}"
            )
        n = (len(coords) - 1) // 2
        return cls(tuple(coords[:n]), tuple(coords[n:2 * n]), coords[2 * n])

    @classmethod
    def parse(cls, text: str) -> HPoint:
        """Parse ``"x,y,tau"`` (or ``2n+1`` comma-separated values)."""
        try:
            coords = [float(part) for part in text.split(",")]
        except ValueError as exc:
            raise UsageError(f"cannot parse point {text!r}: {exc}") from exc
        return cls.from_coords(coords)

    def coords(self) -> tuple[float, ...]:
        return (*self.x, *self.y, self.tau)

    def r2(self) -> float:
        """Squared horizontal length ``|x|^2 + |y|^2``."""
        return sum(v * v for v in self.x) + sum(v * v for v in self.y)

    def to_dict(self) -> dict[str, Any]:
        return {"x": list(self.x), "y": list(self.y), "tau": self.tau}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> HPoint:
        return cls(tuple(data["x"]), tuple(data["y"]), data["tau"])


def _check_same_dim(a: HPoint, b: HPoint) -> None:
    if a.n != b.n:
        raise UsageError(f"dimension mismatch: n={a.n} and n={b.n}")


def group_mul(a: HPoint, b: HPoint) -> HPoint:
    """Group product ``a o b``."""
    _check_same_dim(a, b)
    twist = sum(xa * yb - xb * ya for xa, ya, xb, yb in zip(a.x, a.y, b.x, b.y))
    return HPoint(
        tuple(u + v for u, v in zip(a.x, b.x)),
        tuple(u + v for u, v in zip(a.y, b.y)),
        a.tau + b.tau + 2.0 * twist,
    )


def group_inv(a: HPoint) -> HPoint:
    return HPoint(tuple(-v for v in a.x), tuple(-v for v in a.y), -a.tau)


def dilate(lam: float, a: HPoint) -> HPoint:
    """Parabolic dilation ``(lam x, lam y, lam^2 tau)``."""
    if not lam > 0:
        raise UsageError(f"dilation factor must be positive, got {lam}")
    return HPoint(tuple(lam * v for v in a.x), tuple(lam * v for v in a.y), lam * lam * a.tau)


def koranyi_norm(a: HPoint) -> float:
    """``((|x|^2 + |y|^2)^2 + tau^2)^(1/4)``."""
    return math.sqrt(math.hypot(a.r2(), a.tau))


def koranyi_dist(a: HPoint, b: HPoint) -> float:
    """``|b^-1 o a|_H``."""
    _check_same_dim(a, b)
    return koranyi_norm(group_mul(group_inv(b), a))


# -- array forms --------------------------------------------------------------


def mul_arrays(
    x1: np.ndarray, y1: np.ndarray, t1: np.ndarray,
    x2: np.ndarray, y2: np.ndarray, t2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized group law. ``x*``/``y*`` carry a trailing axis of length n."""
    twist = np.sum(x1 * y2 - x2 * y1, axis=-1)
    return x1 + x2, y1 + y2, t1 + t2 + 2.0 * twist


def norm_sq_arrays(x: np.ndarray, y: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Squared Korányi norm ``sqrt(r^4 + tau^2)`` for coordinate arrays."""
    r2 = np.sum(x * x, axis=-1) + np.sum(y * y, axis=-1)
    return np.hypot(r2, tau)


def koranyi_norm_arrays(x: np.ndarray, y: np.ndarray, tau: np.ndarray) -> np.ndarray:
    return np.sqrt(norm_sq_arrays(x, y, tau))

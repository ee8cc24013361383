"""Exception types raised by hheat."""

from __future__ import annotations


class HeatError(Exception):
    """Base class for all hheat errors."""


class UsageError(HeatError, ValueError):
    """An operation was called with arguments outside its domain."""


class ConfigError(UsageError):
    """A run configuration is malformed. ``key`` is the dotted key path."""

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(HeatError, ArithmeticError):
    """A computation produced a result that cannot be trusted."""


class QuadratureError(NumericalError):
    """Panel refinement of a kernel integral did not agree."""


class InvariantViolation(NumericalError):
    """A named invariant failed. ``step`` is set by the solver."""

    def __init__(self, name: str, message: str, step: int | None = None) -> None:
        self.name = name
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"{name}{where}: {message}")

"""Verification reports: named checks with measured margins and a deterministic digest."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .digest import hash_state


def _finite(value: float) -> float | str:
    """JSON has no inf/nan; keep them readable."""
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


@dataclass(frozen=True)
class CheckResult:
    """One named invariant: passed, measured value and the tolerance it was held to."""

    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": _finite(float(self.measured)),
            "tolerance": _finite(float(self.tolerance)),
        }
        if self.detail:
            d["detail"] = self.detail
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CheckResult:
        return cls(
            name=data["name"],
            passed=data["passed"],
            measured=float(data["measured"]),
            tolerance=float(data["tolerance"]),
            detail=data.get("detail", ""),
        )


@dataclass
class VerifyReport:
    """Outcome of a verification battery."""

    checks: list[CheckResult] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def fail(self, name: str, detail: str) -> CheckResult:
        """Record a check that could not complete."""
        return self.add(CheckResult(name, False, math.nan, math.nan, detail))

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    @property
    def digest(self) -> str:
        """Hash of the check names and verdicts (not the measured values)."""
        return hash_state({
            "checks": [[c.name, bool(c.passed)] for c in self.checks],
            "config": self.config,
        })

    def __len__(self) -> int:
        return len(self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "count": len(self.checks),
            "failures": self.failures,
            "checks": [c.to_dict() for c in self.checks],
            "config": self.config,
            "digest": self.digest,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> VerifyReport:
        return cls(
            checks=[CheckResult.from_dict(c) for c in data.get("checks", [])],
            config=data.get("config", {}),
        )

"""MassTrace: the recorded time series of a solver run.

Each record carries the digest of its values chained to the digest of the
record before it (the first record chains to ``GENESIS``), so a trace
edited after the run no longer verifies.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .digest import hash_state

COLUMNS = ("step", "t", "mass", "linf", "lp_p", "absorbed_cum", "leak_cum")
CSV_COLUMNS = COLUMNS + ("digest",)
GENESIS = "GENESIS"

# |M(0) - M(t) - absorbed(t) - leak(t)| allowed by verify(), relative to M(0)
IDENTITY_RTOL = 5e-2


@dataclass(frozen=True)
class TraceRecord:
    """State summary at one recorded step."""

    step: int
    t: float
    mass: float
    linf: float
    lp_p: float
    absorbed_cum: float
    leak_cum: float
    digest: str = ""

    @property
    def corrected_mass(self) -> float:
        """In-box mass plus what left the box."""
        return self.mass + self.leak_cum

    def values(self) -> dict[str, Any]:
        return {"step": self.step, **{c: float(getattr(self, c)) for c in COLUMNS[1:]}}

    def chained_digest(self, previous: str) -> str:
        return hash_state({"previous": previous, **self.values()})

    def to_dict(self) -> dict[str, Any]:
        return {**self.values(), "digest": self.digest}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TraceRecord:
        return cls(
            step=int(data["step"]),
            **{c: float(data[c]) for c in COLUMNS[1:]},
            digest=str(data.get("digest", "")),
        )


@dataclass
class MassTrace:
    """Ordered records of one run.

    The rules: the digest chain is intact, masses are nonnegative and never
    increase by more than ``rtol * mass[0]`` from one record to the next, and
    ``M(0) = M(t) + absorbed(t) + leak(t)`` holds to ``identity_rtol * M(0)``.
    """

    p: float
    records: list[TraceRecord] = field(default_factory=list)
    label: str = ""

    @property
    def head(self) -> str:
        """Digest of the last record, or ``GENESIS``."""
        return self.records[-1].digest if self.records else GENESIS

    def append(self, **values: Any) -> TraceRecord:
        unsigned = TraceRecord(**values)
        record = TraceRecord(**unsigned.values(), digest=unsigned.chained_digest(self.head))
        self.records.append(record)
        return record

    @property
    def length(self) -> int:
        return len(self.records)

    @property
    def initial_mass(self) -> float:
        return self.records[0].mass if self.records else 0.0

    @property
    def final(self) -> TraceRecord:
        if not self.records:
            raise IndexError("empty trace")
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS and name != "corrected_mass":
            raise KeyError(f"Unknown trace column: {name}")
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def at_time(self, t: float) -> TraceRecord:
        """The record closest to ``t``."""
        times = self.column("t")
        return self.records[int(np.argmin(np.abs(times - t)))]

    def verify(self, rtol: float = 1e-10, identity_rtol: float = IDENTITY_RTOL) -> tuple[bool, int | None]:
        """Check the chain, nonnegative non-increasing mass and the mass identity.

        Returns (True, None) if valid, or (False, break_index) if broken.
        """
        m0 = self.initial_mass
        previous = GENESIS
        for i, record in enumerate(self.records):
            if record.digest != record.chained_digest(previous):
                return False, i
            previous = record.digest
            if record.mass < 0:
                return False, i
            if i and record.mass > self.records[i - 1].mass + rtol * m0:
                return False, i
            if abs(m0 - record.mass - record.absorbed_cum - record.leak_cum) > identity_rtol * abs(m0):
                return False, i
        return True, None

    def walk(self) -> Iterator[tuple[TraceRecord, float]]:
        """Yield each record with its mass change since the previous record."""
        previous = None
        for record in self.records:
            delta = 0.0 if previous is None else record.mass - previous.mass
            yield record, delta
            previous = record

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> TraceRecord:
        return self.records[index]

    def __iter__(self):
        return iter(self.records)

    # -- CSV -------------------------------------------------------------------

    def to_csv(self) -> str:
        """CSV text with a header row; floats use ``repr`` so reruns are byte-identical."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([r.step] + [repr(float(getattr(r, c))) for c in COLUMNS[1:]] + [r.digest])
        return buffer.getvalue()

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, text: str, p: float, label: str = "") -> MassTrace:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected trace columns {reader.fieldnames}")
        return cls(p=p, records=[TraceRecord.from_dict(row) for row in reader], label=label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "label": self.label,
            "length": self.length,
            "head": self.head,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MassTrace:
        return cls(
            p=float(data["p"]),
            records=[TraceRecord.from_dict(r) for r in data.get("records", [])],
            label=data.get("label", ""),
        )

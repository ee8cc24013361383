"""Field files and the on-disk kernel cache.

A field file is one line of canonical JSON followed by the values as
little-endian float64 in C order::

    {"Lx":8.0,...,"format":"hheat-field","n":1,"nonnegative":true,"version":1}\\n
    <Nx^n * Ny^n * Ntau doubles>

Extra header keys (the kernel cache stores its quadrature there) are
preserved on read.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

import numpy as np

from .errors import UsageError
from .field import GridField, GridSpec
from .heatkernel import FORMAT_VERSION, KernelQuadratureParams, KernelTable

FIELD_FORMAT = "hheat-field"
FIELD_SUFFIX = ".hhf"
CACHE_ENV = "HHEAT_CACHE_DIR"
DEFAULT_CACHE_DIR = ".hheat/kernels"


def write_field(path: str | Path, field: GridField, extra: dict[str, Any] | None = None) -> Path:
    """Write ``field`` to ``path``. Returns the path."""
    path = Path(path)
    header = {
        "format": FIELD_FORMAT,
        "version": FORMAT_VERSION,
        "nonnegative": field.nonnegative,
        **field.spec.to_dict(),
    }
    if extra:
        header.update(extra)
    line = json.dumps(header, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as f:
        f.write(line.encode("utf-8") + b"\n")
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return path


def read_header(path: str | Path) -> dict[str, Any]:
    with open(path, "rb") as f:
        return json.loads(f.readline().decode("utf-8"))


def read_field(path: str | Path, trust_flags: bool = True) -> tuple[GridField, dict[str, Any]]:
    """Read a field file. Returns ``(field, header)``.

    With ``trust_flags=False`` the ``nonnegative`` flag is not enforced, so a
    damaged file can still be loaded and inspected.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Field file not found: {path}")
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        payload = f.read()
    if header.get("format") != FIELD_FORMAT:
        raise UsageError(f"{path} is not a {FIELD_FORMAT} file")
    spec = GridSpec.from_dict(header)
    count = int(np.prod(spec.shape))
    if len(payload) != 8 * count:
        raise UsageError(f"{path}: expected {8 * count} bytes of values, found {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8").reshape(spec.shape)
    flag = bool(header.get("nonnegative", False)) and trust_flags
    return GridField(spec, values, nonnegative=flag), header


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, DEFAULT_CACHE_DIR))


class KernelCache:
    """Persist kernel tables as field files keyed by their configuration digest."""

    def __init__(self, directory: str | Path | None = None) -> None:
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.directory.mkdir(parents=True, exist_ok=True)

    def _table_path(self, key: str) -> Path:
        return self.directory / f"{key}{FIELD_SUFFIX}"

    def save(self, table: KernelTable) -> Path:
        """Save a table to disk. Returns the file path."""
        return write_field(self._table_path(table.key), table.values, extra={
            "key": table.key,
            "kernel": table.header(),
        })

    def load(self, key: str) -> KernelTable:
        """Load a table from disk. Values are not re-checked here."""
        path = self._table_path(key)
        if not path.exists():
            raise FileNotFoundError(f"Kernel table not found: {key}")
        values, header = read_field(path, trust_flags=False)
        meta = header["kernel"]
        return KernelTable(
            n=int(meta["n"]),
            spec=values.spec,
            params=KernelQuadratureParams.from_dict(meta["quadrature"]),
            values=values,
        )

    def list_tables(self) -> list[dict[str, Any]]:
        """List stored tables with basic info."""
        tables = []
        for path in sorted(self.directory.glob(f"*{FIELD_SUFFIX}")):
            try:
                header = read_header(path)
                tables.append({
                    "key": header["key"],
                    "n": header["n"],
                    "shape": [header["Nx"], header["Ny"], header["Ntau"]],
                    "path": str(path),
                })
            except (json.JSONDecodeError, UnicodeDecodeError, KeyError):
                continue
        return tables

    def delete(self, key: str) -> bool:
        """Delete a table file. Returns True if deleted."""
        path = self._table_path(key)
        if path.exists():
            os.remove(path)
            return True
        return False

    def exists(self, key: str) -> bool:
        return self._table_path(key).exists()

"""Deterministic digests for cache keys and reports."""

from __future__ import annotations

import hashlib
import json

import numpy as np


def hash_state(state: dict) -> str:
    """Hash a JSON-serializable dict.

    Uses canonical JSON (sorted keys, compact separators) for determinism.
    """
    canonical = json.dumps(state, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def hash_array(values: np.ndarray) -> str:
    """Hash the shape and little-endian float64 bytes of an array."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    h = hashlib.sha256(json.dumps(list(arr.shape)).encode("utf-8"))
    h.update(arr.tobytes())
    return h.hexdigest()


def cache_key(kind: str, state: dict) -> str:
    """Short key ``{kind}_{hash[:16]}`` used for file names."""
    return f"{kind}_{hash_state(state)[:16]}"

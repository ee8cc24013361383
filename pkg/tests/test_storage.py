"""Tests for hheat.storage: field files."""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from hheat import GridField, GridSpec, UsageError
from hheat.storage import FIELD_FORMAT, read_field, read_header, write_field

SMALL = GridSpec(1, 4.0, 4.0, 8.0, 16, 16, 32)
COUNT = 16 * 16 * 32


def ramp():
    return GridField(SMALL, np.arange(COUNT, dtype=np.float64).reshape(SMALL.shape) / COUNT)


class TestFieldFiles:
    def test_write_read(self):
        field = ramp()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_field(Path(tmpdir) / "u.hhf", field)
            loaded, header = read_field(path)
            assert np.array_equal(loaded.values, field.values)
            assert loaded.spec == SMALL
            assert header["format"] == FIELD_FORMAT

    def test_header_is_one_json_line(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_field(Path(tmpdir) / "u.hhf", ramp(), extra={"t": 2.5})
            first = path.read_bytes().split(b"\n", 1)[0]
            header = json.loads(first)
            assert header == read_header(path)
            assert header["t"] == 2.5
            assert header["Ntau"] == 32
            assert path.stat().st_size == len(first) + 1 + 8 * COUNT

    def test_nonnegative_flag(self):
        field = GridField(SMALL, ramp().values, nonnegative=True)
        with tempfile.TemporaryDirectory() as tmpdir:
            loaded, _ = read_field(write_field(Path(tmpdir) / "u.hhf", field))
            assert loaded.nonnegative

    def test_missing(self):
        with pytest.raises(FileNotFoundError, match="Field file not found"):
            read_field("/nonexistent/u.hhf")

    def test_foreign_format(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "u.hhf"
            path.write_bytes(b'{"format": "other"}\n')
            with pytest.raises(UsageError, match="not a hheat-field file"):
                read_field(path)

    def test_truncated_payload(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_field(Path(tmpdir) / "u.hhf", ramp())
            path.write_bytes(path.read_bytes()[:-8])
            with pytest.raises(UsageError, match="bytes of values"):
                read_field(path)

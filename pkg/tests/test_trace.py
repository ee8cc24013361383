"""Tests for hheat.trace: record validation, walking and the CSV form."""

import tempfile
from dataclasses import replace
from pathlib import Path

import pytest

from hheat import MassTrace
from hheat.trace import CSV_COLUMNS, GENESIS


def make_trace(masses, leak=0.0):
    """Records whose absorbed mass closes M(0) = M(t) + absorbed + leak exactly."""
    trace = MassTrace(p=2.0, label="k=1")
    for i, m in enumerate(masses):
        trace.append(
            step=i, t=0.5 * i, mass=m, linf=m, lp_p=m * m,
            absorbed_cum=masses[0] - m - leak * i, leak_cum=leak * i,
        )
    return trace


class TestMassTrace:
    def test_empty(self):
        trace = MassTrace(p=2.0)
        assert trace.length == 0
        assert trace.initial_mass == 0.0
        assert trace.verify() == (True, None)
        with pytest.raises(IndexError):
            trace.final

    def test_verify_valid(self):
        assert make_trace([1.0, 0.9, 0.9, 0.5]).verify() == (True, None)

    def test_verify_detects_growth(self):
        valid, broken = make_trace([1.0, 0.9, 0.95, 0.5]).verify()
        assert valid is False
        assert broken == 2

    def test_verify_tolerates_roundoff(self):
        assert make_trace([1.0, 0.9, 0.9 + 1e-12]).verify()[0] is True

    def test_verify_detects_negative(self):
        assert make_trace([1.0, -0.1]).verify() == (False, 1)

    def test_chain_links_records(self):
        trace = make_trace([1.0, 0.8, 0.6])
        assert trace.records[0].digest == trace.records[0].chained_digest(GENESIS)
        assert trace.records[2].digest == trace.records[2].chained_digest(trace.records[1].digest)
        assert trace.head == trace.records[2].digest
        assert MassTrace(p=2.0).head == GENESIS

    def test_edited_mass_breaks_chain(self):
        trace = make_trace([1.0, 0.9, 0.8, 0.7])
        trace.records[3] = replace(trace.records[3], mass=0.4)
        assert trace.verify() == (False, 3)

    def test_edited_middle_record_is_named(self):
        trace = make_trace([1.0, 0.9, 0.8, 0.7])
        trace.records[1] = replace(trace.records[1], absorbed_cum=0.0)
        assert trace.verify() == (False, 1)

    def test_identity_violation_detected(self):
        trace = MassTrace(p=2.0)
        trace.append(step=0, t=0.0, mass=1.0, linf=1.0, lp_p=1.0, absorbed_cum=0.0, leak_cum=0.0)
        trace.append(step=1, t=1.0, mass=0.9, linf=0.9, lp_p=0.81, absorbed_cum=0.1, leak_cum=0.0)
        trace.append(step=2, t=2.0, mass=0.4, linf=0.4, lp_p=0.16, absorbed_cum=0.3, leak_cum=0.0)
        assert trace.verify() == (False, 2)
        assert trace.verify(identity_rtol=0.5) == (True, None)

    def test_leak_closes_identity(self):
        assert make_trace([1.0, 0.8, 0.6], leak=0.05).verify() == (True, None)

    def test_walk(self):
        deltas = [d for _, d in make_trace([1.0, 0.75, 0.5]).walk()]
        assert deltas == [0.0, -0.25, -0.25]

    def test_columns_and_lookup(self):
        trace = make_trace([1.0, 0.8, 0.6], leak=0.05)
        assert list(trace.column("mass")) == [1.0, 0.8, 0.6]
        assert trace.column("corrected_mass")[2] == pytest.approx(0.7)
        assert trace.at_time(0.6).step == 1
        assert trace[2].step == 2
        with pytest.raises(KeyError, match="Unknown trace column"):
            trace.column("energy")


class TestTraceCsv:
    def test_header(self):
        text = make_trace([1.0, 0.5]).to_csv()
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
        assert len(text.splitlines()) == 3

    def test_csv_round_trip_is_exact(self):
        trace = make_trace([1.0, 1.0 / 3.0, 0.1])
        again = MassTrace.from_csv(trace.to_csv(), p=2.0, label="k=1")
        assert again == trace
        assert again.to_csv() == trace.to_csv()

    def test_write(self):
        trace = make_trace([1.0, 0.5])
        with tempfile.TemporaryDirectory() as tmpdir:
            path = trace.write_csv(Path(tmpdir) / "trace.csv")
            assert path.read_text(encoding="utf-8") == trace.to_csv()

    def test_csv_keeps_digests(self):
        trace = make_trace([1.0, 0.5, 0.25])
        again = MassTrace.from_csv(trace.to_csv(), p=2.0)
        assert again.verify() == (True, None)
        assert again.head == trace.head

    def test_edited_csv_fails_verify(self):
        text = make_trace([1.0, 0.5, 0.25]).to_csv().replace("0.25,", "0.125,", 1)
        assert MassTrace.from_csv(text, p=2.0).verify()[0] is False

    def test_rejects_foreign_columns(self):
        with pytest.raises(ValueError, match="unexpected trace columns"):
            MassTrace.from_csv("a,b\n1,2\n", p=2.0)

    def test_dict_round_trip(self):
        trace = make_trace([1.0, 0.5])
        data = trace.to_dict()
        assert data["length"] == 2
        assert MassTrace.from_dict(data) == trace

"""End-to-end tests for the semilinear heat lab.

Full runs at the preset scales: the mass dichotomy across the critical
exponent, the capacity functional of a stored run, the Monte Carlo
cross-check through the command line and the complete verification battery.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import replace
from pathlib import Path

import pytest

from hheat import AbsorptionProfile, KernelCache, capacity_functional, dichotomy_sweep, parse_config
from hheat.asymptotics import profile_convergence
from hheat.cli import DICHOTOMY_PRESET, main
from hheat.verify import run_verify

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def sweep():
    cfg = parse_config(json.dumps(DICHOTOMY_PRESET))
    return dichotomy_sweep([1.1, 1.25, 2.5], cfg.solver, cfg.absorption, workers=4, jobs=2, keep_runs=True)


# ────────────────────────────────────────────────────────────────────────────
# 1. Mass dichotomy: p = 1.1 loses its mass, p = 2.5 keeps almost all of it
# ────────────────────────────────────────────────────────────────────────────

class TestDichotomy:
    """Leak-corrected mass on the wide box over T_end = 20."""

    def test_regimes(self, sweep):
        assert sweep.critical == 1.5
        assert sweep.row(1.25).regime == "extinction"
        assert sweep.row(2.5).regime == "persistence"

    def test_mass_separates(self, sweep):
        low, high = sweep.row(1.25), sweep.row(2.5)
        assert high.mass_ratio > 0.95
        assert low.mass_ratio < high.mass_ratio

    def test_desk_scale_thresholds(self, sweep):
        assert sweep.row(2.5).plateau <= 0.05
        assert sweep.row(2.5).mass_ratio >= 0.5
        assert sweep.row(1.1).mass_ratio <= 0.2
        assert sweep.plateau_ordering()

    def test_traces_valid(self, sweep):
        for row in sweep.rows:
            valid, broken = row.trace.verify()
            assert valid is True, f"p={row.p} broke at record {broken}"
            assert row.residual <= 5e-2

    def test_profile_series(self, sweep):
        run = sweep.results[2.5]
        for q in (1.0, 2.0):
            series = profile_convergence(run, q, workers=4)
            assert len(series.times) == len(run.snapshots) - 1
            assert all(r >= 0.0 for r in series.relative)
            assert series.decreasing_tail(3), (q, series.values[-3:])


# ────────────────────────────────────────────────────────────────────────────
# 2. Capacity functional of a stored run
# ────────────────────────────────────────────────────────────────────────────

class TestCapacity:
    """Y(R) is non-increasing and bounded by log 2 times the total absorption weight."""

    def test_checks_hold(self, sweep):
        trace = capacity_functional(sweep.results[1.25], [1.0, 4.0, 16.0, 64.0, 256.0])
        assert all(c.passed for c in trace.checks())
        assert trace.Y[0] <= trace.bound * 1.05

    def test_short_run(self):
        cfg = parse_config(json.dumps(DICHOTOMY_PRESET))
        solver = replace(cfg.solver, t_end=4.0)
        result = dichotomy_sweep([1.25], solver, AbsorptionProfile.constant(), workers=4, keep_runs=True)
        run = result.results[1.25]
        assert len(run.snapshots) == 3
        assert all(c.passed for c in capacity_functional(run, [1.0, 4.0, 16.0]).checks())


# ────────────────────────────────────────────────────────────────────────────
# 3. Monte Carlo cross-check through the command line
# ────────────────────────────────────────────────────────────────────────────

class TestMonteCarloCommand:
    """Histogram at t agrees with h_t; the same histogram fails against h_2t."""

    def test_density_files_and_verdicts(self, capsys, monkeypatch):
        with tempfile.TemporaryDirectory() as tmpdir:
            monkeypatch.setenv("HHEAT_CACHE_DIR", str(Path(tmpdir) / "cache"))
            out = Path(tmpdir) / "density.hhf"
            code = main([
                "montecarlo", "--paths", "200000", "--seed", "7", "--workers", "4",
                "--out", str(out),
            ])
            assert code == 0
            summary = json.loads(capsys.readouterr().out)
            assert summary["kernel"]["passed"] is True
            assert summary["kernel_2t"]["passed"] is False
            assert out.exists()
            assert (Path(tmpdir) / "density.stderr.hhf").exists()
            assert len(KernelCache().list_tables()) == 1


# ────────────────────────────────────────────────────────────────────────────
# 4. Verification battery
# ────────────────────────────────────────────────────────────────────────────

class TestVerify:
    """Every named check of the battery passes on a clean cache."""

    def test_battery_passes(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            report = run_verify(cache=KernelCache(tmpdir), workers=4)
            assert report.failures == []
            assert report.passed
            names = report.names
            for name in ("group.associativity", "kernel.normalization", "kernel.semigroup",
                         "solver.mass_identity", "analysis.cutoff_uniform",
                         "condition.classification", "montecarlo.kernel_agreement"):
                assert name in names

    def test_digest_is_stable(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cache = KernelCache(tmpdir)
            first = run_verify(cache=cache, workers=4)
            second = run_verify(cache=cache, workers=4)
            assert first.digest == second.digest

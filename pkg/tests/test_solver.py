"""Tests for hheat.solver: absorption profiles, the exact absorption flow and split stepping."""

import math

import numpy as np
import pytest

from hheat import AbsorptionProfile, GridField, GridSpec, InitialData, SolverConfig, UsageError, evolve
from hheat.field import integrate_field, lp_norm, subtract
from hheat.solver import absorption_step, comparison_check, domination_check, mass_identity_residual

SMALL = GridSpec(1, 4.0, 4.0, 8.0, 16, 16, 32)
GAUSSIAN = InitialData(kind="gaussian", amplitude=1.0)


def config(**overrides):
    base = dict(p=2.0, dt=0.5, t_end=2.0, grid=SMALL, initial=GAUSSIAN)
    base.update(overrides)
    return SolverConfig(**base)


def constant_field(value):
    return GridField(SMALL, np.full(SMALL.shape, value), nonnegative=True)


class TestAbsorptionProfile:
    def test_constant(self):
        k = AbsorptionProfile.constant(2.0)
        assert k(3.0) == 2.0
        assert k.integral(1.0, 4.0) == 6.0
        assert k.infimum(100.0) == 2.0
        assert k.tail_exponent == 0.0

    def test_power_integral(self):
        assert AbsorptionProfile.power_law(1.0).integral(0.0, 1.0) == pytest.approx(1.5)
        assert AbsorptionProfile.power_law(-1.0).integral(0.0, 1.0) == pytest.approx(math.log(2.0))
        assert AbsorptionProfile.power_law(-2.0, c=3.0).integral(1.0, 3.0) == pytest.approx(3.0 * (0.5 - 0.25))

    def test_power_infimum(self):
        assert AbsorptionProfile.power_law(-1.0).infimum(3.0) == pytest.approx(0.25)
        assert AbsorptionProfile.power_law(0.5).infimum(3.0) == 1.0

    def test_tabulated(self):
        k = AbsorptionProfile.tabulated([0.0, 2.0], [1.0, 3.0])
        assert k(1.0) == pytest.approx(2.0)
        assert k(10.0) == pytest.approx(3.0)
        assert k.integral(0.0, 2.0) == pytest.approx(4.0)
        assert k.integral(2.0, 4.0) == pytest.approx(6.0)
        assert k.infimum(5.0) == 1.0

    def test_tabulated_integral_is_exact_across_nodes(self):
        k = AbsorptionProfile.tabulated([0.0, 1.0, 3.0], [1.0, 3.0, 2.0])
        assert k.integral(0.0, 3.0) == pytest.approx(7.0, rel=1e-12)
        assert k.integral(0.5, 2.0) == pytest.approx(4.0, rel=1e-12)
        assert k.integral(1.5, 2.5) == pytest.approx(2.5, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(UsageError, match="k must be positive"):
            AbsorptionProfile.constant(0.0)
        with pytest.raises(UsageError, match="k must be positive"):
            AbsorptionProfile.tabulated([0.0, 1.0], [1.0, -1.0])

    def test_rejects_unsorted_table(self):
        with pytest.raises(UsageError, match="strictly increasing"):
            AbsorptionProfile.tabulated([1.0, 0.0], [1.0, 1.0])

    def test_rejects_reversed_bounds(self):
        with pytest.raises(UsageError, match="reversed"):
            AbsorptionProfile.constant().integral(2.0, 1.0)

    def test_dict_round_trip(self):
        for k in (AbsorptionProfile.constant(0.5), AbsorptionProfile.power_law(-0.5, 2.0),
                  AbsorptionProfile.tabulated([0.0, 1.0, 5.0], [1.0, 0.5, 0.25])):
            assert AbsorptionProfile.from_dict(k.to_dict()) == k

    def test_describe(self):
        assert AbsorptionProfile.power_law(-1.0, 2.0).describe() == "k=2(1+t)^-1"


class TestAbsorptionStep:
    def test_exact_flow(self):
        # u' = -u^2 from u=1 over unit time gives 1/2
        out = absorption_step(constant_field(1.0), 0.0, 1.0, AbsorptionProfile.constant(), 2.0)
        assert np.allclose(out.values, 0.5, rtol=1e-14)

    def test_flow_composes(self):
        k = AbsorptionProfile.power_law(-0.5)
        u = constant_field(3.0)
        once = absorption_step(u, 0.0, 2.0, k, 1.5)
        twice = absorption_step(absorption_step(u, 0.0, 0.7, k, 1.5), 0.7, 2.0, k, 1.5)
        assert np.allclose(once.values, twice.values, rtol=1e-12)

    def test_zero_interval_is_identity(self):
        u = constant_field(2.0)
        assert absorption_step(u, 1.0, 1.0, AbsorptionProfile.constant(), 2.0) is u

    def test_keeps_zero_and_order(self):
        values = np.zeros(SMALL.shape)
        values[3, 4, 5] = 0.2
        values[3, 4, 6] = 0.4
        out = absorption_step(GridField(SMALL, values), 0.0, 5.0, AbsorptionProfile.constant(), 3.0)
        assert out.values[0, 0, 0] == 0.0
        assert 0.0 < out.values[3, 4, 5] < out.values[3, 4, 6] < 0.4

    def test_rejects_negative_input(self):
        values = np.zeros(SMALL.shape)
        values[0, 0, 0] = -1e-3
        with pytest.raises(UsageError, match="nonnegative"):
            absorption_step(GridField(SMALL, values), 0.0, 1.0, AbsorptionProfile.constant(), 2.0)

    def test_rejects_p_one(self):
        with pytest.raises(UsageError, match="p > 1"):
            absorption_step(constant_field(1.0), 0.0, 1.0, AbsorptionProfile.constant(), 1.0)


class TestInitialData:
    def test_bump_peak_and_support(self):
        u = InitialData(kind="bump", amplitude=0.3, radius=1.5).sample(SMALL)
        assert u.values[8, 8, 16] == pytest.approx(0.3)
        assert u.values[0, 0, 0] == 0.0
        assert u.values.max() == pytest.approx(0.3)

    def test_bump_center_size(self):
        with pytest.raises(UsageError, match="center needs 3"):
            InitialData(kind="bump", center=(0.0, 1.0)).sample(SMALL)

    def test_gaussian_mass(self):
        spec = GridSpec(1, 6.0, 6.0, 6.0, 48, 48, 48)
        u = InitialData(kind="gaussian", amplitude=2.0, widths=(1.0, 1.0, 1.0)).sample(spec)
        assert integrate_field(u) == pytest.approx(2.0 * math.pi ** 1.5, rel=1e-8)

    def test_rejects_unknown_kind(self):
        with pytest.raises(UsageError, match="unknown initial data"):
            InitialData(kind="box")

    def test_rejects_negative(self):
        with pytest.raises(UsageError, match="nonnegative"):
            InitialData(amplitude=-1.0)

    def test_dict_round_trip(self):
        data = InitialData(kind="bump", amplitude=0.2, radius=3.0, center=(1.0, 0.0, 2.0))
        assert InitialData.from_dict(data.to_dict()) == data


class TestSolverConfig:
    def test_steps(self):
        assert config(dt=0.25, t_end=2.0).steps == 8

    def test_rejects_p(self):
        with pytest.raises(UsageError, match="p > 1 required"):
            config(p=1.0)

    def test_rejects_uneven_steps(self):
        with pytest.raises(UsageError, match="integer"):
            config(dt=0.3, t_end=1.0)

    def test_rejects_dt_above_end(self):
        with pytest.raises(UsageError, match="exceeds"):
            config(dt=3.0, t_end=2.0)

    def test_rejects_splitting(self):
        with pytest.raises(UsageError, match="splitting"):
            config(splitting="yoshida")


class TestEvolve:
    def test_invariants(self):
        cfg = config()
        u0 = GAUSSIAN.sample(SMALL)
        run = evolve(u0, cfg, AbsorptionProfile.constant())
        assert run.final.values.min() >= 0.0
        assert max(r.linf for r in run.trace) <= 1.0 + 1e-12
        valid, broken = run.trace.verify()
        assert valid is True
        assert broken is None
        assert run.trace.final.t == 2.0
        assert run.trace.final.mass < integrate_field(u0)
        assert mass_identity_residual(run.trace) <= 1e-2 * integrate_field(u0)

    def test_lie_splitting(self):
        cfg = config(splitting="lie")
        run = evolve(GAUSSIAN.sample(SMALL), cfg, AbsorptionProfile.constant())
        assert run.trace.verify()[0]
        assert len(run.trace) == 5

    def test_records_and_snapshots(self):
        cfg = config(record_every=3, snapshot_every=2)
        run = evolve(GAUSSIAN.sample(SMALL), cfg, AbsorptionProfile.constant())
        assert [r.step for r in run.trace] == [0, 3, 4]
        assert [t for t, _ in run.snapshots] == [0.0, 1.0, 2.0]
        assert run.snapshot_at(2.0) is run.final
        with pytest.raises(KeyError):
            run.snapshot_at(0.5)

    def test_start_time_shifts_clock(self):
        cfg = config(t_start=3.0, t_end=1.0)
        run = evolve(GAUSSIAN.sample(SMALL), cfg, AbsorptionProfile.power_law(-1.0))
        assert run.trace[0].t == 3.0
        assert run.trace.final.t == 4.0

    def test_absorption_lowers_mass(self):
        u0 = GAUSSIAN.sample(SMALL)
        weak = evolve(u0, config(), AbsorptionProfile.constant(0.1)).trace.final.mass
        strong = evolve(u0, config(), AbsorptionProfile.constant(10.0)).trace.final.mass
        assert strong < weak

    def test_deterministic(self):
        u0 = GAUSSIAN.sample(SMALL)
        a = evolve(u0, config(), AbsorptionProfile.constant(), workers=1)
        b = evolve(u0, config(), AbsorptionProfile.constant(), workers=2)
        assert np.array_equal(a.final.values, b.final.values)
        assert a.trace.to_csv() == b.trace.to_csv()

    def test_rejects_grid_mismatch(self):
        u0 = GAUSSIAN.sample(SMALL.refined())
        with pytest.raises(UsageError, match="grid"):
            evolve(u0, config(), AbsorptionProfile.constant())


class TestOrdering:
    def test_comparison(self):
        u0 = GAUSSIAN.sample(SMALL)
        ok, violation = comparison_check(u0.scaled(0.5), u0, config(), AbsorptionProfile.constant())
        assert ok is True
        assert violation == 0.0

    def test_comparison_rejects_unordered(self):
        u0 = GAUSSIAN.sample(SMALL)
        with pytest.raises(UsageError, match="u0 <= v0"):
            comparison_check(u0, u0.scaled(0.5), config(), AbsorptionProfile.constant())

    def test_domination_by_free_flow(self):
        result = domination_check(GAUSSIAN.sample(SMALL), config(), AbsorptionProfile.constant())
        assert result.ok is True
        assert len(result.lp_ratios) == 5
        assert all(r <= 1.0 for r in result.lp_ratios)
        assert result.lp_ratios[-1] < 1.0


class TestMaximumPrinciple:
    def test_plateau_stays_below_ode_solution(self):
        # constant data c solves w' = -w^2, w = c / (1 + c t), and bounds u from above
        c = 0.5
        run = evolve(constant_field(c), config(snapshot_every=1), AbsorptionProfile.constant())
        assert len(run.snapshots) == 5
        for t, u in run.snapshots:
            assert u.values.min() >= 0.0
            assert u.values.max() <= c / (1.0 + c * t) * (1.0 + 1e-12)
        assert max(r.linf for r in run.trace) <= c


class TestHeatLimit:
    @pytest.mark.slow
    def test_mass_conserved_when_absorption_vanishes(self):
        spec = GridSpec(1, 10.0, 10.0, 40.0, 20, 20, 80)
        cfg = config(grid=spec, dt=1.0, t_end=4.0)
        u0 = GAUSSIAN.sample(spec)
        m0 = integrate_field(u0)
        run = evolve(u0, cfg, AbsorptionProfile.constant(1e-12))
        assert abs(run.trace.final.mass - m0) <= 2e-2 * m0
        assert run.trace.final.absorbed_cum <= 1e-10 * m0
        assert run.trace.verify() == (True, None)


class TestStepRefinement:
    # on this lattice-compatible grid the tau shear lands on nodes, so only splitting error is left
    SPEC = GridSpec(1, 6.0, 6.0, 16.0, 24, 24, 64)

    def final_states(self, splitting):
        u0 = InitialData(kind="gaussian", amplitude=0.5).sample(self.SPEC)
        k = AbsorptionProfile.constant()
        return [
            evolve(u0, config(grid=self.SPEC, dt=dt, t_end=1.0, splitting=splitting), k).final
            for dt in (1.0, 0.5, 0.25)
        ]

    def halving_ratio(self, splitting):
        coarse, mid, fine = self.final_states(splitting)
        return lp_norm(subtract(coarse, mid), 1.0) / lp_norm(subtract(mid, fine), 1.0)

    @pytest.mark.slow
    def test_lie_first_order(self):
        assert self.halving_ratio("lie") >= 1.5

    @pytest.mark.slow
    def test_strang_second_order(self):
        assert self.halving_ratio("strang") >= 3.0

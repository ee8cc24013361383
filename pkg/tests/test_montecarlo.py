"""Tests for hheat.montecarlo: path sampling, histograms and z-score comparisons."""

import numpy as np
import pytest

from hheat import (
    GridField,
    GridSpec,
    KernelTable,
    McConfig,
    UsageError,
    compare_with_kernel,
    estimate_density,
    sample_paths,
)
from hheat.field import integrate_field
from hheat.heatkernel import DEFAULT_PARAMS, sample_kernel
from hheat.montecarlo import MAX_FLAGGED, Ensemble, compare_densities

GRID = GridSpec(1, 6.0, 6.0, 24.0, 24, 24, 48)


@pytest.fixture(scope="module")
def ensemble():
    return sample_paths(McConfig(paths=20_000, t=1.0, substeps=64, seed=5))


class TestMcConfig:
    def test_steps(self):
        assert McConfig(paths=10).steps == 128
        assert McConfig(paths=10, t=0.5, substeps=3).steps == 2
        assert McConfig(paths=10, t=2.0, substeps=64).steps == 128

    def test_acceptance_grade(self):
        assert McConfig(paths=100_000).acceptance_grade
        assert not McConfig(paths=1000).acceptance_grade
        assert not McConfig(paths=100_000, substeps=16).acceptance_grade

    def test_rejects_bad_values(self):
        with pytest.raises(UsageError, match="paths"):
            McConfig(paths=0)
        with pytest.raises(UsageError, match="t must be positive"):
            McConfig(paths=10, t=0.0)
        with pytest.raises(UsageError, match="workers"):
            McConfig(paths=10, workers=0)

    def test_dict_round_trip(self):
        cfg = McConfig(paths=500, t=2.0, substeps=32, seed=9, workers=3)
        assert McConfig.from_dict(cfg.to_dict()) == cfg


class TestSamplePaths:
    def test_deterministic_for_seed_and_workers(self):
        cfg = McConfig(paths=1000, substeps=16, seed=3, workers=2)
        a, b = sample_paths(cfg), sample_paths(cfg)
        assert np.array_equal(a.coords(), b.coords())

    def test_seed_changes_paths(self):
        a = sample_paths(McConfig(paths=100, substeps=8, seed=1))
        b = sample_paths(McConfig(paths=100, substeps=8, seed=2))
        assert not np.array_equal(a.tau, b.tau)

    def test_uneven_split(self):
        ens = sample_paths(McConfig(paths=5, substeps=4, workers=3))
        assert len(ens) == 5
        assert ens.coords().shape == (5, 3)

    def test_higher_dimension(self):
        ens = sample_paths(McConfig(paths=10, substeps=4, n=2))
        assert ens.n == 2
        assert ens.point(0).n == 2

    def test_horizontal_variance(self, ensemble):
        # each horizontal coordinate has variance 2t
        assert np.var(ensemble.x[:, 0]) == pytest.approx(2.0, rel=0.05)
        assert np.var(ensemble.y[:, 0]) == pytest.approx(2.0, rel=0.05)

    def test_vertical_moments(self, ensemble):
        # E tau = 0 and E tau^2 = 16 t^2 (1 - 1/steps)
        assert abs(float(np.mean(ensemble.tau))) < 0.15
        assert float(np.mean(ensemble.tau ** 2)) == pytest.approx(16.0 * (1 - 1 / 64), rel=0.1)


class TestEnsemble:
    def test_dilated(self):
        ens = Ensemble(np.array([[1.0]]), np.array([[2.0]]), np.array([3.0]))
        d = ens.dilated(2.0)
        assert d.coords().tolist() == [[2.0, 4.0, 12.0]]
        with pytest.raises(UsageError, match="positive"):
            ens.dilated(0.0)

    def test_inverted(self):
        ens = Ensemble(np.array([[1.0]]), np.array([[2.0]]), np.array([3.0]))
        assert ens.inverted().coords().tolist() == [[-1.0, -2.0, -3.0]]


class TestHistogram:
    def test_mass_matches_in_box_fraction(self, ensemble):
        est = estimate_density(ensemble, GRID)
        assert 0.9 < est.in_box_fraction <= 1.0
        assert integrate_field(est.density) == pytest.approx(est.in_box_fraction)
        assert est.errors.values.min() >= 0.0
        assert est.paths == 20_000

    def test_node_centred_cells(self):
        spec = GridSpec(1, 2.0, 2.0, 2.0, 8, 8, 8)
        ens = Ensemble(np.array([[0.2], [-0.3]]), np.array([[0.0], [0.0]]), np.array([0.0, 0.0]))
        est = estimate_density(ens, spec)
        assert est.counts[4, 4, 4] == 1
        assert est.counts[3, 4, 4] == 1

    def test_points_outside_are_dropped(self):
        spec = GridSpec(1, 2.0, 2.0, 2.0, 8, 8, 8)
        ens = Ensemble(np.array([[5.0], [0.0]]), np.array([[0.0], [0.0]]), np.array([0.0, 0.0]))
        assert estimate_density(ens, spec).in_box_fraction == 0.5

    def test_rejects_empty(self):
        empty = Ensemble(np.zeros((0, 1)), np.zeros((0, 1)), np.zeros(0))
        with pytest.raises(UsageError, match="empty ensemble"):
            estimate_density(empty, GRID)

    def test_rejects_dimension_mismatch(self, ensemble):
        with pytest.raises(UsageError, match="n=1"):
            estimate_density(ensemble, GridSpec.default(2))


class TestComparison:
    def test_self_comparison(self, ensemble):
        est = estimate_density(ensemble, GRID)
        result = compare_densities(est, est)
        assert result.cells > 0
        assert result.flagged == 0
        assert result.worst_z == 0.0
        assert result.passed

    def test_independent_seeds_agree(self, ensemble):
        other = sample_paths(McConfig(paths=20_000, t=1.0, substeps=64, seed=6))
        result = compare_densities(estimate_density(ensemble, GRID), estimate_density(other, GRID))
        assert result.fraction <= MAX_FLAGGED
        assert result.check().name == "montecarlo.kernel_agreement"
        assert result.to_dict()["cells"] == result.cells

    def test_different_times_disagree(self, ensemble):
        later = sample_paths(McConfig(paths=20_000, t=2.0, substeps=64, seed=6))
        result = compare_densities(estimate_density(ensemble, GRID), estimate_density(later, GRID))
        assert not result.passed

    def test_grid_mismatch(self, ensemble):
        a = estimate_density(ensemble, GRID)
        b = estimate_density(ensemble, GridSpec.compact(1))
        with pytest.raises(UsageError, match="different grids"):
            compare_densities(a, b)

    def test_kernel_dimension_mismatch(self, ensemble):
        spec = GridSpec(2, 2.0, 2.0, 2.0, 8, 8, 8)
        table = KernelTable(2, spec, DEFAULT_PARAMS, GridField.zeros(spec))
        with pytest.raises(UsageError, match="table has n=2"):
            compare_with_kernel(estimate_density(ensemble, GRID), table, 1.0)

    @pytest.mark.slow
    def test_kernel_agreement(self):
        table = KernelTable(1, GRID, DEFAULT_PARAMS, sample_kernel(GRID, 1.0))
        cfg = McConfig(paths=100_000, t=1.0, substeps=128, seed=0, workers=4)
        est = estimate_density(sample_paths(cfg), GRID)
        assert compare_with_kernel(est, table, 1.0, workers=4).passed
        # the same histogram is far from h_2
        assert not compare_with_kernel(est, table, 2.0, workers=4).passed

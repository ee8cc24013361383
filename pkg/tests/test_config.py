"""Tests for hheat.config: strict JSON run configuration."""

import json
import tempfile
from pathlib import Path

import pytest

from hheat import ConfigError, GridSpec, RunConfig, parse_config
from hheat.config import DEFAULT_SWEEP, config_from_dict, load_config


def config_error(data):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    return info.value


class TestDefaults:
    def test_minimal(self):
        cfg = parse_config('{"solver": {"p": 2.0}}')
        assert cfg.n == 1
        assert cfg.grid == GridSpec.compact(1)
        assert cfg.solver.p == 2.0
        assert cfg.solver.dt == 0.25
        assert cfg.solver.t_end == 4.0
        assert cfg.solver.splitting == "strang"
        assert cfg.absorption.kind == "constant"
        assert cfg.sweep_p == DEFAULT_SWEEP
        assert cfg.montecarlo.paths == 100_000
        assert cfg.output_dir == Path("out")

    def test_integer_p_accepted(self):
        assert parse_config('{"solver": {"p": 3}}').solver.p == 3.0

    def test_echo_round_trip(self):
        cfg = parse_config('{"solver": {"p": 2.5, "dt": 0.5}, "grid": "wide", "seed": 4}')
        again = RunConfig.from_dict(json.loads(cfg.to_json()))
        assert again == cfg
        assert again.to_json() == cfg.to_json()

    def test_explicit_grid(self):
        data = {"solver": {"p": 2.0}, "grid": {"Lx": 4, "Ly": 4, "Ltau": 8, "Nx": 16, "Ny": 16, "Ntau": 32}}
        cfg = config_from_dict(data)
        assert cfg.grid == GridSpec(1, 4.0, 4.0, 8.0, 16, 16, 32)
        assert cfg.grid_preset is None
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    def test_blocks_flow_through(self):
        cfg = config_from_dict({
            "n": 1,
            "solver": {"p": 1.75, "snapshot_every": 2},
            "initial": {"kind": "gaussian", "amplitude": 0.5},
            "absorption": {"kind": "power", "c": 2.0, "a": -0.5},
            "quadrature": {"Lambda": 50.0},
            "montecarlo": {"paths": 2000, "t": 2.0},
            "workers": 3,
            "seed": 11,
        })
        assert cfg.solver.initial.kind == "gaussian"
        assert cfg.solver.snapshot_every == 2
        assert cfg.absorption.tail_exponent == -0.5
        assert cfg.quadrature.Lambda == 50.0
        assert cfg.solver.params == cfg.quadrature
        assert cfg.montecarlo.seed == 11
        assert cfg.montecarlo.workers == 3


class TestErrors:
    def test_missing_solver(self):
        assert config_error({}).key == "solver"

    def test_missing_p(self):
        err = config_error({"solver": {}})
        assert err.key == "solver.p"
        assert "missing required key" in str(err)

    def test_p_not_above_one(self):
        err = config_error({"solver": {"p": 1.0}})
        assert err.key == "solver.p"
        assert "p > 1 required" in str(err)

    def test_unknown_key(self):
        err = config_error({"solver": {"p": 2.0, "step": 0.1}})
        assert str(err) == "solver.step: unknown key"

    def test_unknown_top_key(self):
        assert config_error({"solver": {"p": 2.0}, "verbose": True}).key == "verbose"

    def test_wrong_type(self):
        err = config_error({"solver": {"p": "2"}})
        assert err.key == "solver.p"
        assert "expected number" in str(err)

    def test_bool_is_not_a_number(self):
        assert config_error({"solver": {"p": 2.0}, "seed": True}).key == "seed"

    def test_unknown_preset(self):
        assert config_error({"solver": {"p": 2.0}, "grid": "huge"}).key == "grid"

    def test_bad_grid_values(self):
        err = config_error({"solver": {"p": 2.0},
                            "grid": {"Lx": 4, "Ly": 4, "Ltau": 8, "Nx": 15, "Ny": 16, "Ntau": 32}})
        assert err.key == "grid"
        assert "Nx" in str(err)

    def test_solver_domain_error_names_block(self):
        err = config_error({"solver": {"p": 2.0, "dt": 0.3, "t_end": 1.0}})
        assert err.key == "solver"

    def test_absorption_domain_error(self):
        err = config_error({"solver": {"p": 2.0}, "absorption": {"c": -1.0}})
        assert err.key == "absorption"
        assert "k must be positive" in str(err)

    def test_sweep_p_list(self):
        assert config_error({"solver": {"p": 2.0}, "sweep": {"p_list": [1.0, 2.0]}}).key == "sweep.p_list"
        assert config_error({"solver": {"p": 2.0}, "sweep": {"p_list": []}}).key == "sweep.p_list"

    def test_invalid_json(self):
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config("{solver: }")

    def test_root_not_object(self):
        with pytest.raises(ConfigError, match="<root>: expected an object"):
            parse_config("[1, 2]")


class TestLoadConfig:
    def test_load(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "run.json"
            path.write_text('{"solver": {"p": 2.0}}', encoding="utf-8")
            assert load_config(path).solver.p == 2.0

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError, match="Config file not found"):
            load_config("/nonexistent/run.json")

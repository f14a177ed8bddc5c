"""INI configuration loading and validation."""

import pytest

from tubeflow.config import AppConfig, load_config
from tubeflow.errors import ConfigError


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg.grid.n_points == 100
    assert cfg.fluid.dt == pytest.approx(1e-3)
    assert cfg.fluid.n_steps == 200
    assert cfg.coupling.accelerator == "iqn-ils"
    assert cfg.training.history == 10


def test_partial_file_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[grid]\nn_points = 25\n\n[coupling]\nomega0 = 0.3\n", encoding="utf-8"
    )
    cfg = load_config(path)
    assert cfg.grid.n_points == 25
    assert cfg.grid.length == pytest.approx(0.05)  # untouched default
    assert cfg.coupling.omega0 == pytest.approx(0.3)
    assert cfg.build_grid().n_points == 25


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[turbulence]\nmodel = k-epsilon\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config(path)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[grid]\nnpoints = 10\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(path)


def test_bad_value_type(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[grid]\nn_points = many\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_bool_parsing(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[fluid]\nstabilization = off\n", encoding="utf-8")
    assert load_config(path).fluid.stabilization is False
    path.write_text("[fluid]\nstabilization = maybe\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_checkpoint_times_tuple(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[rollout]\ncheckpoint_times = 0.01, 0.02\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.rollout.checkpoint_times == (0.01, 0.02)


def test_invariants_checked_eagerly(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[fluid]\ndt = -1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[tube]\nr0 = 0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/run.ini")


def test_derived_objects_match_sections():
    cfg = AppConfig()
    assert cfg.tube_params().r0 == cfg.tube.r0
    assert cfg.fluid_params().inlet_v0 == cfg.fluid.inlet_v0
    assert cfg.newton_config().tol == cfg.fluid.newton_tol
    assert cfg.coupling_config().tol == cfg.coupling.tol
    assert cfg.train_config().history == cfg.training.history
    assert cfg.train_config(seed_override=7).seed == 7

"""End-to-end CLI behavior: commands, artifacts, and exit codes."""

import numpy as np
import pytest

from tubeflow.cli import main
from tubeflow.domain import read_trajectory

TINY_SIM = """\
[grid]
n_points = 20

[fluid]
n_steps = 6
jacobian_mode = analytic
"""

TINY_TRAIN = """\
[grid]
n_points = 20

[fluid]
n_steps = 15
jacobian_mode = analytic

[training]
epochs = 30
batch_size = 0
conv_channels = 2
lstm_hidden = 4
dense_hidden = 8
loss_threshold = 1e9

[rollout]
n_steps = 2
checkpoint_times = 0.012
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    """One simulate + train pipeline shared by the cheap CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.ini"
    cfg.write_text(TINY_TRAIN, encoding="utf-8")
    traj_csv = root / "traj.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(traj_csv)]) == 0
    models = root / "models"
    assert (
        main(
            [
                "train",
                "--config",
                str(cfg),
                "--reference",
                str(traj_csv),
                "--out",
                str(models),
            ]
        )
        == 0
    )
    return cfg, traj_csv, models


def test_simulate_writes_trajectory(tmp_path, capsys):
    cfg = _write(tmp_path, "run.ini", TINY_SIM)
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    traj = read_trajectory(out)
    assert len(traj) == 7
    assert traj.grid.n_points == 20
    assert "wrote 7 states" in capsys.readouterr().out


def test_simulate_numerical_failure_exits_one(tmp_path, capsys):
    cfg = _write(
        tmp_path,
        "run.ini",
        TINY_SIM
        + "\n[coupling]\naccelerator = constant-relaxation\nomega0 = 0.01\nmax_iters = 3\n",
    )
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 1
    assert "divergence" in capsys.readouterr().err


def test_bad_config_exits_two(tmp_path, capsys):
    cfg = _write(tmp_path, "run.ini", "[grid]\nresolution = 10\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_reference_exits_two(tmp_path, capsys):
    assert (
        main(
            [
                "train",
                "--reference",
                str(tmp_path / "nope.csv"),
                "--out",
                str(tmp_path / "m"),
            ]
        )
        == 2
    )
    assert "missing file" in capsys.readouterr().err


def test_rollout_missing_models_exits_two(tmp_path, tiny_run, capsys):
    cfg, traj_csv, _ = tiny_run
    assert (
        main(
            [
                "rollout",
                "--config",
                str(cfg),
                "--models",
                str(tmp_path / "empty"),
                "--reference",
                str(traj_csv),
                "--out",
                str(tmp_path / "out"),
            ]
        )
        == 2
    )
    assert "missing model file" in capsys.readouterr().err


def test_train_writes_artifacts(tiny_run):
    _, _, models = tiny_run
    for name in ("fluid.ckpt", "solid.ckpt", "norm_stats.json", "fluid_loss.csv", "solid_loss.csv"):
        assert (models / name).exists(), name
    lines = (models / "fluid_loss.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch,train_loss,val_loss"
    assert len(lines) == 31


def test_train_loss_threshold_exits_one(tmp_path, tiny_run, capsys):
    cfg_text = TINY_TRAIN.replace("loss_threshold = 1e9", "loss_threshold = 1e-12")
    cfg = _write(tmp_path, "strict.ini", cfg_text)
    _, traj_csv, _ = tiny_run
    assert (
        main(
            [
                "train",
                "--config",
                cfg,
                "--reference",
                str(traj_csv),
                "--out",
                str(tmp_path / "m"),
            ]
        )
        == 1
    )
    assert "above threshold" in capsys.readouterr().err


def test_rollout_and_evaluate(tmp_path, tiny_run, capsys):
    cfg, traj_csv, models = tiny_run
    out = tmp_path / "roll"
    assert (
        main(
            [
                "rollout",
                "--config",
                str(cfg),
                "--models",
                str(models),
                "--reference",
                str(traj_csv),
                "--out",
                str(out),
            ]
        )
        == 0
    )
    predicted = read_trajectory(out / "predicted.csv")
    assert len(predicted) == 12  # history 10 + 2 predicted steps
    assert (out / "report.csv").exists()
    capsys.readouterr()

    report_csv = tmp_path / "self.csv"
    assert (
        main(
            [
                "evaluate",
                "--config",
                str(cfg),
                "--predicted",
                str(traj_csv),
                "--reference",
                str(traj_csv),
                "--out",
                str(report_csv),
            ]
        )
        == 0
    )
    rows = report_csv.read_text(encoding="utf-8").splitlines()
    assert len(rows) == 17
    data = np.array([row.split(",")[2:5] for row in rows[1:]], dtype=float)
    assert np.all(data == 0.0)


def test_verify_passes(tmp_path, capsys):
    cfg = _write(tmp_path, "run.ini", "[grid]\nn_points = 20\n")
    assert main(["verify", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4
    assert "FAIL" not in out


def test_train_determinism_byte_identical(tmp_path, tiny_run):
    cfg, traj_csv, _ = tiny_run
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert (
            main(
                [
                    "train",
                    "--config",
                    str(cfg),
                    "--reference",
                    str(traj_csv),
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
    for name in ("fluid.ckpt", "solid.ckpt", "norm_stats.json", "fluid_loss.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name

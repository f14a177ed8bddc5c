"""Network composition, loss, optimizer, checkpoints, composed grad check."""

import numpy as np
import pytest

from tubeflow.errors import CheckpointError
from tubeflow.nn import (
    AdamState,
    Conv1dSpec,
    DenseSpec,
    DropoutSpec,
    LeakyReluSpec,
    LstmSpec,
    Network,
    adam_step,
    grad_check,
    load_checkpoint,
    loss_nmse,
    save_checkpoint,
    sidecar_path,
)


def _composed_specs(n=6, channels=2):
    return [
        Conv1dSpec(channels, 4, 3),
        LeakyReluSpec(),
        Conv1dSpec(4, 4, 3),
        LeakyReluSpec(),
        LstmSpec(4 * n, 5),
        DenseSpec(5, 8),
        LeakyReluSpec(),
        DenseSpec(8, n),
    ]


def test_forward_shape_adaptation():
    n = 6
    net = Network(_composed_specs(n), rng=np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(3, 4, 2 * n))
    out = net.forward(x)
    assert out.shape == (3, 4, n)
    assert net.predict(x).shape == (3, n)


def test_forward_rejects_bad_rank_and_channels():
    net = Network(_composed_specs(6), rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.forward(np.zeros((3, 12)))
    with pytest.raises(ValueError):
        net.forward(np.zeros((3, 4, 13)))  # not divisible by 2 channels


def test_backward_before_forward_raises():
    net = Network([DenseSpec(3, 2)])
    with pytest.raises(RuntimeError):
        net.backward(np.zeros((1, 1, 2)))


def test_parameter_names():
    net = Network(_composed_specs(6), rng=np.random.default_rng(0))
    names = set(net.parameters())
    assert "layer0.weight" in names
    assert "layer4.w_x" in names
    assert "layer7.bias" in names
    assert set(net.gradients()) == names


@pytest.mark.parametrize("seed", range(5))
def test_grad_check_composed_architecture(seed):
    rng = np.random.default_rng(seed)
    net = Network(_composed_specs(5), rng=rng)
    x = rng.normal(size=(2, 3, 10))
    target = rng.uniform(0.5, 1.5, size=(2, 5)) * rng.choice([-1.0, 1.0], size=(2, 5))
    assert grad_check(net, x, target) < 1e-5


def test_loss_nmse_hand_cases():
    # Exact match -> 0.
    value, grad = loss_nmse(np.array([2.0, -1.0]), np.array([2.0, -1.0]))
    assert value == 0.0
    assert np.all(grad == 0.0)
    # Single element: (1.5-1)^2 / 1^2 = 0.25.
    value, grad = loss_nmse(np.array([1.5]), np.array([1.0]))
    assert abs(value - 0.25) < 1e-15
    assert abs(grad[0] - 1.0) < 1e-15
    # Guard case: zero target uses delta=1e-6 -> 0.1^2/1e-6 = 1e4.
    value, _ = loss_nmse(np.array([0.1]), np.array([0.0]))
    assert abs(value - 1e4) < 1e-15 * 1e4


def test_loss_nmse_gradient_matches_fd():
    rng = np.random.default_rng(4)
    pred = rng.normal(size=7)
    target = rng.normal(size=7)
    _, grad = loss_nmse(pred, target)
    for j in range(7):
        eps = 1e-7
        up = pred.copy()
        up[j] += eps
        dn = pred.copy()
        dn[j] -= eps
        fd = (loss_nmse(up, target)[0] - loss_nmse(dn, target)[0]) / (2 * eps)
        assert abs(grad[j] - fd) < 1e-6 * max(1.0, abs(fd))


def test_loss_nmse_validation():
    with pytest.raises(ValueError):
        loss_nmse(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        loss_nmse(np.zeros(0), np.zeros(0))


def test_adam_quadratic_oracle():
    rng = np.random.default_rng(11)
    w_star = rng.normal(size=12)
    params = {"w": rng.normal(size=12)}
    state = AdamState(lr=1e-2)
    for _ in range(2000):
        grads = {"w": 2.0 * (params["w"] - w_star)}
        adam_step(params, grads, state)
    assert np.linalg.norm(params["w"] - w_star) < 1e-3


def test_adam_rejects_non_finite_gradients():
    params = {"w": np.zeros(2)}
    with pytest.raises(FloatingPointError):
        adam_step(params, {"w": np.array([np.nan, 0.0])}, AdamState())


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    net = Network(_composed_specs(5), rng=rng)
    path = tmp_path / "model.ckpt"
    save_checkpoint(net, path)
    assert sidecar_path(path).exists()
    back = load_checkpoint(path)
    assert back.specs == net.specs
    for name, value in net.parameters().items():
        assert np.array_equal(back.parameters()[name], value)
    # Bit-identical predictions after the round trip.
    x = rng.normal(size=(2, 3, 10))
    assert np.array_equal(back.predict(x), net.predict(x))


def test_checkpoint_bad_magic(tmp_path):
    net = Network([DenseSpec(3, 2)], rng=np.random.default_rng(0))
    path = tmp_path / "model.ckpt"
    save_checkpoint(net, path)
    data = path.read_bytes()
    path.write_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_truncation_names_parameter(tmp_path):
    net = Network([DenseSpec(3, 2)], rng=np.random.default_rng(0))
    path = tmp_path / "model.ckpt"
    save_checkpoint(net, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_missing_sidecar(tmp_path):
    net = Network([DenseSpec(3, 2)], rng=np.random.default_rng(0))
    path = tmp_path / "model.ckpt"
    save_checkpoint(net, path)
    sidecar_path(path).unlink()
    with pytest.raises(CheckpointError, match="sidecar"):
        load_checkpoint(path)


def test_checkpoint_spec_mismatch(tmp_path):
    net = Network([DenseSpec(3, 2)], rng=np.random.default_rng(0))
    other = Network([DenseSpec(4, 2)], rng=np.random.default_rng(0))
    path = tmp_path / "model.ckpt"
    save_checkpoint(net, path)
    save_checkpoint(other, tmp_path / "other.ckpt")
    # Pair net weights with other's sidecar: shapes disagree.
    sidecar_path(path).write_text(
        sidecar_path(tmp_path / "other.ckpt").read_text(encoding="utf-8"),
        encoding="utf-8",
    )
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_dropout_network_train_vs_eval():
    specs = [DenseSpec(4, 4), DropoutSpec(0.5), DenseSpec(4, 2)]
    net = Network(specs, rng=np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(2, 3, 4))
    eval_out = net.predict(x)
    net.train()
    rng = np.random.default_rng(2)
    train_out = net.forward(x, rng=rng)[:, -1]
    assert not np.allclose(eval_out, train_out)
    net.eval()
    assert np.array_equal(net.predict(x), eval_out)

"""Per-subdomain surrogate pipeline.

Windowed dataset construction from classical trajectories, per-channel
z-score normalization, training of the fluid and solid networks, implicit
coupled autoregressive rollout, and error reporting against the classical
reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .coupling import CouplingConfig, WindowContext, make_accelerator, run_time_window
from .domain import FieldState, Grid1D, Trajectory
from .errors import CouplingDivergenceError, InsufficientDataError, RolloutError, TrainingError
from .nn import (
    AdamState,
    Conv1dSpec,
    DenseSpec,
    DropoutSpec,
    LeakyReluSpec,
    LstmSpec,
    Network,
    adam_step,
    loss_nmse,
)

__all__ = [
    "TrainConfig",
    "NormStats",
    "WindowSample",
    "RolloutReport",
    "build_windows",
    "fit_norm_stats",
    "normalize_fields",
    "denormalize_fields",
    "default_fluid_specs",
    "default_solid_specs",
    "train",
    "TrainedSurrogates",
    "train_surrogates",
    "coupled_rollout",
    "error_report",
    "write_report_csv",
]

REPORT_HEADER = "step,t,err_p,err_v,err_a,coupling_iters"
DEFAULT_CHECKPOINT_TIMES = (0.052, 0.100, 0.14, 0.192)

# Channel names, in the stacking order of the sample tensors.
_FLUID_CHANNELS = ("pressure", "velocity", "area")
_SOLID_CHANNELS = ("area", "pressure")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for surrogate training; all values are decisions."""

    history: int = 10
    epochs: int = 2200
    batch_size: int = 16  # 0 means full batch
    lr: float = 2e-3
    lr_decay: float = 0.998  # per-epoch multiplicative decay of the Adam step size
    dropout_rate: float = 0.0
    seed: int = 0
    train_fraction: float = 0.8
    conv_channels: int = 8
    kernel_size: int = 3
    lstm_hidden: int = 32
    dense_hidden: int = 64
    loss_delta: float = 1e-6
    target_loss: float = 5e-4  # stop early once train loss reaches this (0: never)
    input_noise: float = 0.0  # std of Gaussian noise added to inputs per batch

    def __post_init__(self):
        if self.history < 1:
            raise ValueError(f"history must be at least 1, got {self.history}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and standard deviation from the training split.

    Standard deviations below 1e-12 are replaced by 1 so constant channels
    normalize to zero instead of dividing by noise.
    """

    mean: dict
    std: dict

    def to_json(self) -> str:
        return json.dumps({"mean": self.mean, "std": self.std}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NormStats":
        data = json.loads(text)
        return cls(mean=data["mean"], std=data["std"])


@dataclass(frozen=True)
class WindowSample:
    """One training sample: H input steps and the step that follows them."""

    fluid_input: np.ndarray  # [H, 3n], rows stack (p, v, a)
    fluid_target: np.ndarray  # [2n], (p, v) at the step after the window
    solid_input: np.ndarray  # [H, 2n], rows stack (a, p)
    solid_target: np.ndarray  # [n], a at the step after the window


@dataclass(frozen=True)
class RolloutReport:
    """Per-step relative L2 errors plus checkpoint rows."""

    err_p: np.ndarray
    err_v: np.ndarray
    err_a: np.ndarray
    coupling_iters: np.ndarray
    checkpoints: tuple  # rows of (requested_t, actual_t, step, err_p, err_v, err_a)
    dt: float


def build_windows(traj: Trajectory, history: int):
    """Sliding one-step-ahead samples; sample j inputs states [j, j+H).

    The newest row's incoming-interface channel (area for the fluid net,
    pressure for the solid net) holds the *target-time* value: under implicit
    coupling each network is evaluated at the converged new-step interface
    iterate, so training must condition on it. This is also what makes the
    implicit rollout strictly better posed than the explicit single pass,
    which can only supply the stale previous-step interface.
    """
    n_states = len(traj)
    if n_states <= history:
        raise InsufficientDataError(
            f"trajectory has {n_states} states, need at least {history + 1} for H={history}"
        )
    samples = []
    for j in range(n_states - history):
        window = traj.states[j : j + history]
        target = traj.states[j + history]
        fluid_in = np.stack(
            [np.concatenate([s.pressure, s.velocity, s.area]) for s in window]
        )
        solid_in = np.stack([np.concatenate([s.area, s.pressure]) for s in window])
        n = target.area.shape[0]
        fluid_in[-1, 2 * n :] = target.area
        solid_in[-1, n:] = target.pressure
        samples.append(
            WindowSample(
                fluid_input=fluid_in,
                fluid_target=np.concatenate([target.pressure, target.velocity]),
                solid_input=solid_in,
                solid_target=target.area.copy(),
            )
        )
    return samples


def fit_norm_stats(samples) -> NormStats:
    """Per-channel moments over the training samples (inputs and targets)."""
    if not samples:
        raise ValueError("cannot fit normalization statistics on an empty split")
    n = samples[0].solid_target.shape[0]
    chunks = {"pressure": [], "velocity": [], "area": []}
    for s in samples:
        chunks["pressure"].append(s.fluid_input[:, :n].ravel())
        chunks["velocity"].append(s.fluid_input[:, n : 2 * n].ravel())
        chunks["area"].append(s.fluid_input[:, 2 * n :].ravel())
        chunks["pressure"].append(s.fluid_target[:n])
        chunks["velocity"].append(s.fluid_target[n:])
        chunks["area"].append(s.solid_target)
    mean = {}
    std = {}
    for name, parts in chunks.items():
        values = np.concatenate(parts)
        mean[name] = float(values.mean())
        sd = float(values.std())
        std[name] = sd if sd >= 1e-12 else 1.0
    return NormStats(mean=mean, std=std)


def normalize_fields(values: np.ndarray, channel: str, stats: NormStats) -> np.ndarray:
    return (np.asarray(values, dtype=np.float64) - stats.mean[channel]) / stats.std[channel]


def denormalize_fields(values: np.ndarray, channel: str, stats: NormStats) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * stats.std[channel] + stats.mean[channel]


def _normalize_stacked(block: np.ndarray, channels, stats: NormStats) -> np.ndarray:
    """Normalize a [..., len(channels)*n] array channel slice by slice."""
    n = block.shape[-1] // len(channels)
    out = np.empty_like(block, dtype=np.float64)
    for k, name in enumerate(channels):
        sl = slice(k * n, (k + 1) * n)
        out[..., sl] = normalize_fields(block[..., sl], name, stats)
    return out


def default_fluid_specs(n_points: int, cfg: TrainConfig):
    return _default_specs(n_points, len(_FLUID_CHANNELS), 2 * n_points, cfg)


def default_solid_specs(n_points: int, cfg: TrainConfig):
    return _default_specs(n_points, len(_SOLID_CHANNELS), n_points, cfg)


def _default_specs(n_points, in_channels, out_features, cfg: TrainConfig):
    specs = [
        Conv1dSpec(in_channels, cfg.conv_channels, cfg.kernel_size),
        LeakyReluSpec(),
        Conv1dSpec(cfg.conv_channels, cfg.conv_channels, cfg.kernel_size),
        LeakyReluSpec(),
        LstmSpec(cfg.conv_channels * n_points, cfg.lstm_hidden),
    ]
    if cfg.dropout_rate > 0.0:
        specs.append(DropoutSpec(cfg.dropout_rate))
    specs += [
        DenseSpec(cfg.lstm_hidden, cfg.dense_hidden),
        LeakyReluSpec(),
        DenseSpec(cfg.dense_hidden, out_features),
    ]
    return specs


def train(specs, inputs: np.ndarray, targets: np.ndarray, cfg: TrainConfig):
    """Train one network on normalized (inputs, targets).

    ``inputs`` is [S, H, F], ``targets`` [S, out]. The split is a contiguous
    time prefix (no leakage of later states into the training statistics).
    Returns ``(network, curve)`` where curve rows are
    (epoch, train_loss, val_loss) evaluated with dropout off; val_loss is
    NaN when the validation split is empty.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n_samples = inputs.shape[0]
    if n_samples == 0:
        raise ValueError("no training samples")

    n_train = min(max(int(round(cfg.train_fraction * n_samples)), 1), n_samples)
    x_train, y_train = inputs[:n_train], targets[:n_train]
    x_val, y_val = inputs[n_train:], targets[n_train:]

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    init_rng = np.random.default_rng(seeds[0])
    batch_rng = np.random.default_rng(seeds[1])

    network = Network(specs, rng=init_rng)
    state = AdamState(lr=cfg.lr)
    curve = []

    batch = cfg.batch_size if 0 < cfg.batch_size < n_train else n_train
    for epoch in range(1, cfg.epochs + 1):
        state.lr = cfg.lr * cfg.lr_decay ** (epoch - 1)
        network.train()
        if batch == n_train:
            order = np.arange(n_train)
        else:
            order = batch_rng.permutation(n_train)
        for lo in range(0, n_train, batch):
            idx = order[lo : lo + batch]
            x_batch = x_train[idx]
            if cfg.input_noise > 0.0:
                # Denoising augmentation: the rollout feeds the network its own
                # predictions, so train it to tolerate perturbed inputs.
                x_batch = x_batch + cfg.input_noise * batch_rng.normal(size=x_batch.shape)
            out = network.forward(x_batch, rng=batch_rng)
            value, gpred = loss_nmse(out[:, -1], y_train[idx], delta=cfg.loss_delta)
            if not np.isfinite(value):
                raise TrainingError(f"training loss became non-finite at epoch {epoch}", epoch=epoch)
            gy = np.zeros_like(out)
            gy[:, -1] = gpred
            network.zero_grads()
            network.backward(gy)
            adam_step(network.parameters(), network.gradients(), state)
        network.eval()
        train_loss, _ = loss_nmse(network.forward(x_train)[:, -1], y_train, delta=cfg.loss_delta)
        if x_val.shape[0]:
            val_loss, _ = loss_nmse(network.forward(x_val)[:, -1], y_val, delta=cfg.loss_delta)
        else:
            val_loss = float("nan")
        if not np.isfinite(train_loss):
            raise TrainingError(f"training loss became non-finite at epoch {epoch}", epoch=epoch)
        curve.append((epoch, train_loss, val_loss))
        if cfg.target_loss > 0.0 and train_loss <= cfg.target_loss:
            break
    network.eval()
    return network, curve


@dataclass(frozen=True)
class TrainedSurrogates:
    fluid_net: Network
    solid_net: Network
    stats: NormStats
    fluid_curve: list
    solid_curve: list


def train_surrogates(traj: Trajectory, cfg: TrainConfig) -> TrainedSurrogates:
    """Build windows, fit normalization on the training prefix, train both nets."""
    samples = build_windows(traj, cfg.history)
    n_train = min(max(int(round(cfg.train_fraction * len(samples))), 1), len(samples))
    stats = fit_norm_stats(samples[:n_train])

    fluid_x = _normalize_stacked(np.stack([s.fluid_input for s in samples]), _FLUID_CHANNELS, stats)
    fluid_y = _normalize_stacked(np.stack([s.fluid_target for s in samples]), ("pressure", "velocity"), stats)
    solid_x = _normalize_stacked(np.stack([s.solid_input for s in samples]), _SOLID_CHANNELS, stats)
    solid_y = normalize_fields(np.stack([s.solid_target for s in samples]), "area", stats)

    n_points = samples[0].solid_target.shape[0]
    fluid_net, fluid_curve = train(default_fluid_specs(n_points, cfg), fluid_x, fluid_y, cfg)
    solid_net, solid_curve = train(
        default_solid_specs(n_points, cfg), solid_x, solid_y, replace(cfg, seed=cfg.seed + 1)
    )
    return TrainedSurrogates(
        fluid_net=fluid_net,
        solid_net=solid_net,
        stats=stats,
        fluid_curve=fluid_curve,
        solid_curve=solid_curve,
    )


class _FluidNetParticipant:
    """Area iterate -> predicted new-level pressure; velocity rides along.

    The iterate replaces the area channel of the newest window row, so the
    prediction is genuinely coupled to the solid's latest output.
    """

    def __init__(self, network: Network, stats: NormStats, window: list):
        self.network = network
        self.stats = stats
        self.window = window
        self.last_velocity = None

    def solve(self, interface, context):
        block = np.stack(
            [np.concatenate([s.pressure, s.velocity, s.area]) for s in self.window]
        )
        n = interface.shape[0]
        block[-1, 2 * n :] = interface
        x = _normalize_stacked(block, _FLUID_CHANNELS, self.stats)
        out = self.network.predict(x[None])[0]
        pressure = denormalize_fields(out[:n], "pressure", self.stats)
        self.last_velocity = denormalize_fields(out[n:], "velocity", self.stats)
        return pressure


class _SolidNetParticipant:
    """Pressure iterate -> predicted new-level area."""

    def __init__(self, network: Network, stats: NormStats, window: list):
        self.network = network
        self.stats = stats
        self.window = window

    def solve(self, interface, context):
        block = np.stack([np.concatenate([s.area, s.pressure]) for s in self.window])
        n = interface.shape[0]
        block[-1, n:] = interface
        x = _normalize_stacked(block, _SOLID_CHANNELS, self.stats)
        out = self.network.predict(x[None])[0]
        return denormalize_fields(out, "area", self.stats)


def coupled_rollout(
    fluid_net: Network,
    solid_net: Network,
    seed_states,
    n_steps: int,
    coupling: CouplingConfig,
    stats: NormStats,
    grid: Grid1D,
    dt: float,
    explicit: bool = False,
    participants=None,
):
    """Autoregressive rollout of the two surrogates under implicit coupling.

    ``seed_states`` are the first H reference states. Each new step is the
    converged interface fixed point of the two networks (or a single
    Gauss-Seidel pass when ``explicit`` is set); the converged state is
    appended to the window and the oldest step dropped. Returns
    ``(trajectory, coupling_iterations)`` with H + n_steps states.

    ``participants`` optionally replaces the network participants: a
    callable mapping the live window list to a (fluid, solid) pair, e.g.
    :func:`tubeflow.simulate.classical_rollout_participants`.
    """
    window = list(seed_states)
    if not window:
        raise ValueError("seed must contain at least one state")
    history = len(window)
    states = list(window)
    if participants is None:
        fluid = _FluidNetParticipant(fluid_net, stats, window)
        solid = _SolidNetParticipant(solid_net, stats, window)
    else:
        fluid, solid = participants(window)
    accelerator = make_accelerator(coupling)

    iterations = []
    for step in range(1, n_steps + 1):
        context = WindowContext(t_new=(history - 1 + step) * dt, dt=dt, window_index=step)
        a_init = window[-1].area
        try:
            if explicit:
                pressure = fluid.solve(a_init, context)
                area = solid.solve(pressure, context)
                iters = 1
            else:
                accelerator.begin_window(step)
                result = run_time_window(
                    fluid, solid, a_init, coupling, context=context, accelerator=accelerator
                )
                pressure, area, iters = result.pressure, result.area, result.iterations
            new_state = FieldState(pressure=pressure, velocity=fluid.last_velocity, area=area)
        except (CouplingDivergenceError, ValueError) as exc:
            raise RolloutError(
                f"rollout failed at prediction step {step}: {exc}",
                step=step,
                partial=Trajectory(dt=dt, states=tuple(states), grid=grid),
            )
        states.append(new_state)
        iterations.append(iters)
        window.append(new_state)
        window.pop(0)

    return Trajectory(dt=dt, states=tuple(states), grid=grid), iterations


def _relative_l2(pred: np.ndarray, ref: np.ndarray) -> float:
    ref_norm = float(np.linalg.norm(ref))
    err = float(np.linalg.norm(pred - ref))
    return err / ref_norm if ref_norm > 1e-30 else err


def error_report(
    predicted: Trajectory,
    reference: Trajectory,
    checkpoint_times=DEFAULT_CHECKPOINT_TIMES,
    coupling_iters=None,
) -> RolloutReport:
    """Per-step relative L2 errors per field plus checkpoint rows.

    Checkpoint rows pick the step nearest each requested time and report
    the time actually used.
    """
    if predicted.grid != reference.grid:
        raise ValueError("predicted and reference grids differ")
    if predicted.dt != reference.dt:
        raise ValueError(f"dt mismatch: {predicted.dt} vs {reference.dt}")
    if len(reference) < len(predicted):
        raise ValueError(
            f"reference ({len(reference)} states) shorter than predicted ({len(predicted)})"
        )

    n_steps = len(predicted)
    err_p = np.empty(n_steps)
    err_v = np.empty(n_steps)
    err_a = np.empty(n_steps)
    for k in range(n_steps):
        pred, ref = predicted.states[k], reference.states[k]
        err_p[k] = _relative_l2(pred.pressure, ref.pressure)
        err_v[k] = _relative_l2(pred.velocity, ref.velocity)
        err_a[k] = _relative_l2(pred.area, ref.area)

    if coupling_iters is None:
        iters = np.zeros(n_steps, dtype=np.int64)
    else:
        iters = np.zeros(n_steps, dtype=np.int64)
        tail = np.asarray(coupling_iters, dtype=np.int64)
        iters[n_steps - tail.size :] = tail

    checkpoints = []
    for t_req in checkpoint_times:
        step = int(round(t_req / predicted.dt))
        step = min(max(step, 0), n_steps - 1)
        checkpoints.append(
            (float(t_req), step * predicted.dt, step, err_p[step], err_v[step], err_a[step])
        )

    return RolloutReport(
        err_p=err_p,
        err_v=err_v,
        err_a=err_a,
        coupling_iters=iters,
        checkpoints=tuple(checkpoints),
        dt=predicted.dt,
    )


def write_report_csv(report: RolloutReport, destination) -> None:
    def _rows(f):
        f.write(REPORT_HEADER + "\n")
        for k in range(report.err_p.size):
            f.write(
                "%d,%.17g,%.17g,%.17g,%.17g,%d\n"
                % (
                    k,
                    k * report.dt,
                    report.err_p[k],
                    report.err_v[k],
                    report.err_a[k],
                    report.coupling_iters[k],
                )
            )

    if hasattr(destination, "write"):
        _rows(destination)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as f:
            _rows(f)

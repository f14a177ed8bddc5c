"""INI configuration for the command-line workflows.

Sections mirror the module parameter types. Unknown sections or keys are
rejected: silent hyperparameter typos are the dominant failure mode in
this kind of tool.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .coupling import CouplingConfig
from .domain import FluidParams, Grid1D, TubeParams, build_grid
from .errors import ConfigError
from .fluid import NewtonConfig
from .surrogate import DEFAULT_CHECKPOINT_TIMES, TrainConfig

__all__ = ["AppConfig", "load_config"]


@dataclass(frozen=True)
class GridSection:
    length: float = 0.05
    n_points: int = 100


@dataclass(frozen=True)
class TubeSection:
    r0: float = 5e-3
    h: float = 1e-3
    elastic_modulus: float = 1e6
    sigma0: float = 0.0


@dataclass(frozen=True)
class FluidSection:
    density: float = 1000.0
    inlet_v0: float = 1.0
    inlet_dv: float = 1.0
    pulse_period: float = 0.08
    outlet_pressure: float = 0.0
    dt: float = 1e-3
    n_steps: int = 200
    newton_tol: float = 1e-10
    newton_max_iters: int = 100
    jacobian_mode: str = "finite-difference"
    stabilization: bool = True


@dataclass(frozen=True)
class CouplingSection:
    tol: float = 1e-6
    max_iters: int = 100
    accelerator: str = "iqn-ils"
    omega0: float = 0.1
    max_columns: int = 20
    filter_eps: float = 1e-7
    reuse_windows: int = 0


@dataclass(frozen=True)
class TrainingSection:
    history: int = 10
    epochs: int = 2200
    batch_size: int = 16
    lr: float = 2e-3
    lr_decay: float = 0.998
    dropout_rate: float = 0.0
    seed: int = 0
    train_fraction: float = 0.8
    conv_channels: int = 8
    kernel_size: int = 3
    lstm_hidden: int = 32
    dense_hidden: int = 64
    target_loss: float = 5e-4
    input_noise: float = 0.0
    loss_threshold: float = 1e-3


@dataclass(frozen=True)
class RolloutSection:
    n_steps: int = 0  # 0 means: roll out to the reference horizon
    checkpoint_times: tuple = DEFAULT_CHECKPOINT_TIMES
    explicit: bool = False


_SECTIONS = {
    "grid": GridSection,
    "tube": TubeSection,
    "fluid": FluidSection,
    "coupling": CouplingSection,
    "training": TrainingSection,
    "rollout": RolloutSection,
}


@dataclass(frozen=True)
class AppConfig:
    grid: GridSection = field(default_factory=GridSection)
    tube: TubeSection = field(default_factory=TubeSection)
    fluid: FluidSection = field(default_factory=FluidSection)
    coupling: CouplingSection = field(default_factory=CouplingSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    rollout: RolloutSection = field(default_factory=RolloutSection)

    def build_grid(self) -> Grid1D:
        return build_grid(self.grid.length, self.grid.n_points)

    def tube_params(self) -> TubeParams:
        t = self.tube
        return TubeParams(r0=t.r0, h=t.h, elastic_modulus=t.elastic_modulus, sigma0=t.sigma0)

    def fluid_params(self) -> FluidParams:
        f = self.fluid
        return FluidParams(
            density=f.density,
            inlet_v0=f.inlet_v0,
            inlet_dv=f.inlet_dv,
            pulse_period=f.pulse_period,
            outlet_pressure=f.outlet_pressure,
        )

    def newton_config(self) -> NewtonConfig:
        f = self.fluid
        return NewtonConfig(
            tol=f.newton_tol,
            max_iters=f.newton_max_iters,
            jacobian_mode=f.jacobian_mode,
            stabilization=f.stabilization,
        )

    def coupling_config(self) -> CouplingConfig:
        c = self.coupling
        return CouplingConfig(
            tol=c.tol,
            max_iters=c.max_iters,
            accelerator=c.accelerator,
            omega0=c.omega0,
            max_columns=c.max_columns,
            filter_eps=c.filter_eps,
            reuse_windows=c.reuse_windows,
        )

    def train_config(self, seed_override=None) -> TrainConfig:
        t = self.training
        return TrainConfig(
            history=t.history,
            epochs=t.epochs,
            batch_size=t.batch_size,
            lr=t.lr,
            lr_decay=t.lr_decay,
            dropout_rate=t.dropout_rate,
            seed=t.seed if seed_override is None else seed_override,
            train_fraction=t.train_fraction,
            conv_channels=t.conv_channels,
            kernel_size=t.kernel_size,
            lstm_hidden=t.lstm_hidden,
            dense_hidden=t.dense_hidden,
            target_loss=t.target_loss,
            input_noise=t.input_noise,
        )


def _parse_value(raw: str, kind, section: str, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(float(part) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}")


def load_config(path=None) -> AppConfig:
    """Load an INI file; missing keys take their defaults.

    ``path=None`` returns the full default configuration.
    """
    if path is None:
        return AppConfig()
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}")

    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(
                f"unknown section [{section}]; expected one of {sorted(_SECTIONS)}"
            )
        section_cls = _SECTIONS[section]
        known = {f.name: f.type for f in fields(section_cls)}
        kinds = {f.name: type(getattr(section_cls(), f.name)) for f in fields(section_cls)}
        kwargs = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(
                    f"unknown key {key!r} in [{section}]; expected one of {sorted(known)}"
                )
            kwargs[key] = _parse_value(raw, kinds[key], section, key)
        values[section] = section_cls(**kwargs)

    try:
        cfg = AppConfig(**values)
        # Force validation of the derived parameter objects now, not at use.
        cfg.build_grid()
        cfg.tube_params()
        cfg.fluid_params()
        cfg.newton_config()
        cfg.coupling_config()
        cfg.train_config()
        if cfg.fluid.dt <= 0:
            raise ValueError(f"dt must be positive, got {cfg.fluid.dt}")
        if cfg.fluid.n_steps < 1:
            raise ValueError(f"n_steps must be at least 1, got {cfg.fluid.n_steps}")
    except ValueError as exc:
        raise ConfigError(str(exc))
    return cfg

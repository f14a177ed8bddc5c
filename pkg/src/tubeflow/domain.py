"""Core geometric and state types, the trajectory container, and its CSV format.

All types are plain immutable values after construction and safe to share
read-only across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TrajectoryParseError

__all__ = [
    "Grid1D",
    "TubeParams",
    "FluidParams",
    "FieldState",
    "Trajectory",
    "build_grid",
    "reference_area",
    "write_trajectory",
    "read_trajectory",
]

TRAJECTORY_HEADER = "t,x,pressure,velocity,area"


@dataclass(frozen=True)
class Grid1D:
    """Uniform node-centered 1D grid, inclusive of both end points."""

    length: float
    n_points: int
    dx: float

    def coordinates(self) -> np.ndarray:
        """Node coordinates; the last node sits exactly at ``length``."""
        x = np.arange(self.n_points, dtype=np.float64) * self.dx
        x[-1] = self.length
        return x


@dataclass(frozen=True)
class TubeParams:
    """Elastic wall constants."""

    r0: float = 5e-3
    h: float = 1e-3
    elastic_modulus: float = 1e6
    sigma0: float = 0.0

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if self.h <= 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.elastic_modulus <= 0:
            raise ValueError(f"elastic_modulus must be positive, got {self.elastic_modulus}")
        if self.elastic_modulus <= self.sigma0:
            raise ValueError(
                f"elastic_modulus ({self.elastic_modulus}) must exceed sigma0 "
                f"({self.sigma0}) for the wall law to stay invertible"
            )


@dataclass(frozen=True)
class FluidParams:
    """Fluid constants and boundary forcing."""

    density: float = 1000.0
    inlet_v0: float = 1.0
    inlet_dv: float = 1.0
    pulse_period: float = 0.08
    outlet_pressure: float = 0.0

    def __post_init__(self):
        if self.density <= 0:
            raise ValueError(f"density must be positive, got {self.density}")
        if self.pulse_period <= 0:
            raise ValueError(f"pulse_period must be positive, got {self.pulse_period}")


@dataclass(frozen=True)
class FieldState:
    """Pressure, velocity, and cross-sectional area at one time level."""

    pressure: np.ndarray
    velocity: np.ndarray
    area: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pressure, dtype=np.float64)
        v = np.asarray(self.velocity, dtype=np.float64)
        a = np.asarray(self.area, dtype=np.float64)
        object.__setattr__(self, "pressure", p)
        object.__setattr__(self, "velocity", v)
        object.__setattr__(self, "area", a)
        if not (p.shape == v.shape == a.shape) or p.ndim != 1:
            raise ValueError(
                f"field shapes must be equal 1D vectors, got {p.shape}, {v.shape}, {a.shape}"
            )
        if not (np.isfinite(p).all() and np.isfinite(v).all() and np.isfinite(a).all()):
            raise ValueError("field values must be finite")
        if (a <= 0).any():
            raise ValueError("area must be strictly positive at every node")

    @property
    def n_points(self) -> int:
        return self.pressure.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered sequence of field states; state n lives at time n*dt."""

    dt: float
    states: tuple
    grid: Grid1D

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        for k, s in enumerate(self.states):
            if s.n_points != self.grid.n_points:
                raise ValueError(
                    f"state {k} has {s.n_points} nodes but grid has {self.grid.n_points}"
                )

    def __len__(self) -> int:
        return len(self.states)

    def times(self) -> np.ndarray:
        return np.arange(len(self.states), dtype=np.float64) * self.dt


def build_grid(length: float, n_points: int) -> Grid1D:
    """Uniform grid with ``n_points`` nodes spanning ``[0, length]``."""
    if length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    if n_points < 2:
        raise ValueError(f"n_points must be at least 2, got {n_points}")
    return Grid1D(length=float(length), n_points=int(n_points), dx=length / (n_points - 1))


def reference_area(params: TubeParams) -> float:
    """Cross-sectional area of the unloaded tube, pi*r0**2."""
    return math.pi * params.r0 ** 2


def write_trajectory(traj: Trajectory, destination) -> None:
    """Write a trajectory in long CSV format, rows sorted by (t, x).

    Values are serialized with 17 significant digits so the round trip is
    bit-exact. ``destination`` is a path or a text file object.
    """
    if len(traj) == 0:
        raise ValueError("cannot write an empty trajectory")
    if hasattr(destination, "write"):
        _write_rows(traj, destination)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as f:
            _write_rows(traj, f)


def _write_rows(traj: Trajectory, f) -> None:
    f.write(TRAJECTORY_HEADER + "\n")
    x = traj.grid.coordinates()
    for n, state in enumerate(traj.states):
        t = n * traj.dt
        for i in range(traj.grid.n_points):
            f.write(
                "%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (t, x[i], state.pressure[i], state.velocity[i], state.area[i])
            )


def read_trajectory(source) -> Trajectory:
    """Parse a trajectory CSV written by :func:`write_trajectory`.

    Raises :class:`TrajectoryParseError` with the offending line number for
    malformed rows, inconsistent node counts, or non-monotone time.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    if not lines:
        raise TrajectoryParseError("empty file")
    if lines[0].strip() != TRAJECTORY_HEADER:
        raise TrajectoryParseError(
            f"expected header '{TRAJECTORY_HEADER}', got '{lines[0].strip()}'", line=1
        )

    blocks = []  # one (t, xs, ps, vs, as) group per time level
    current_t = None
    cur = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise TrajectoryParseError(f"expected 5 fields, got {len(parts)}", line=lineno)
        try:
            t, x, p, v, a = (float(s) for s in parts)
        except ValueError:
            raise TrajectoryParseError(f"non-numeric value in row '{line}'", line=lineno)
        if current_t is None or t != current_t:
            if current_t is not None and t <= current_t:
                raise TrajectoryParseError(
                    f"non-monotone time {t!r} after {current_t!r}", line=lineno
                )
            cur = {"t": t, "x": [], "p": [], "v": [], "a": [], "line": lineno}
            blocks.append(cur)
            current_t = t
        cur["x"].append(x)
        cur["p"].append(p)
        cur["v"].append(v)
        cur["a"].append(a)

    if not blocks:
        raise TrajectoryParseError("no data rows")
    n_points = len(blocks[0]["x"])
    for b in blocks:
        if len(b["x"]) != n_points:
            raise TrajectoryParseError(
                f"time block at t={b['t']!r} has {len(b['x'])} nodes, expected {n_points}",
                line=b["line"],
            )
    if n_points < 2:
        raise TrajectoryParseError("grid needs at least 2 nodes")
    if len(blocks) < 2:
        raise TrajectoryParseError("need at least two time levels to infer dt")

    grid = build_grid(length=blocks[0]["x"][-1], n_points=n_points)
    dt = blocks[1]["t"]
    states = [
        FieldState(pressure=np.array(b["p"]), velocity=np.array(b["v"]), area=np.array(b["a"]))
        for b in blocks
    ]
    return Trajectory(dt=dt, states=tuple(states), grid=grid)

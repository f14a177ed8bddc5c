"""Classical implicit-coupled simulation of the elastic-tube benchmark.

Wraps the fluid Newton solver and the algebraic wall law as coupling
participants and marches the serial implicit scheme window by window.
This run produces the ground-truth trajectories the surrogates train on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import CouplingConfig, WindowContext, make_accelerator, run_time_window
from .domain import FieldState, FluidParams, Grid1D, Trajectory, TubeParams
from .fluid import NewtonConfig, solve_fluid_step
from .structure import solve_structure

__all__ = [
    "ClassicalFluidParticipant",
    "ClassicalSolidParticipant",
    "SimulationResult",
    "initial_state",
    "simulate_classical",
    "classical_rollout_participants",
]


class ClassicalFluidParticipant:
    """Maps an interface area vector to the new-level pressure field.

    The previous time level is set once per window; the full converged
    state of the last solve is kept for retrieval after convergence.
    """

    def __init__(self, grid: Grid1D, params: FluidParams, newton: NewtonConfig):
        self.grid = grid
        self.params = params
        self.newton = newton
        self.prev: FieldState | None = None
        self.last_result = None

    def set_previous(self, state: FieldState) -> None:
        self.prev = state

    def solve(self, interface: np.ndarray, context: WindowContext) -> np.ndarray:
        result = solve_fluid_step(
            self.prev, interface, context.dt, self.grid, self.params, self.newton, context.t_new
        )
        self.last_result = result
        return result.state.pressure


class ClassicalSolidParticipant:
    """Maps the interface pressure field to the wall area via the tube law."""

    def __init__(self, params: TubeParams):
        self.params = params

    def solve(self, interface: np.ndarray, context: WindowContext) -> np.ndarray:
        return solve_structure(interface, self.params).area


class _ClassicalFluidRollout:
    """Rollout adapter: previous level read live from the shared window."""

    def __init__(self, grid: Grid1D, params: FluidParams, newton: NewtonConfig, window: list):
        self.grid = grid
        self.params = params
        self.newton = newton
        self.window = window
        self.last_velocity = None

    def solve(self, interface: np.ndarray, context: WindowContext) -> np.ndarray:
        result = solve_fluid_step(
            self.window[-1], interface, context.dt, self.grid, self.params, self.newton,
            context.t_new,
        )
        self.last_velocity = result.state.velocity
        return result.state.pressure


def classical_rollout_participants(
    grid: Grid1D, fluid_params: FluidParams, newton: NewtonConfig, tube: TubeParams
):
    """Participant factory for ``coupled_rollout`` backed by the classical solvers.

    Substituting the classical solvers for the networks makes the rollout
    loop reproduce the plain implicit simulation; useful as an oracle for
    the rollout plumbing itself.
    """

    def factory(window: list):
        return _ClassicalFluidRollout(grid, fluid_params, newton, window), ClassicalSolidParticipant(tube)

    return factory


@dataclass(frozen=True)
class SimulationResult:
    trajectory: Trajectory
    window_iterations: tuple


def initial_state(grid: Grid1D, tube: TubeParams, fluid: FluidParams) -> FieldState:
    """Uniform state at the outlet pressure and baseline inlet velocity."""
    n = grid.n_points
    p = np.full(n, fluid.outlet_pressure, dtype=np.float64)
    v = np.full(n, fluid.inlet_v0, dtype=np.float64)
    a = solve_structure(p, tube).area
    return FieldState(pressure=p, velocity=v, area=a)


def simulate_classical(
    grid: Grid1D,
    tube: TubeParams,
    fluid_params: FluidParams,
    newton: NewtonConfig,
    coupling: CouplingConfig,
    dt: float,
    n_steps: int,
    start: FieldState | None = None,
) -> SimulationResult:
    """Run ``n_steps`` implicit time windows from the uniform initial state."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    fluid = ClassicalFluidParticipant(grid, fluid_params, newton)
    solid = ClassicalSolidParticipant(tube)
    accelerator = make_accelerator(coupling)

    states = [start if start is not None else initial_state(grid, tube, fluid_params)]
    iterations = []
    for step in range(1, n_steps + 1):
        context = WindowContext(t_new=step * dt, dt=dt, window_index=step)
        fluid.set_previous(states[-1])
        accelerator.begin_window(step)
        result = run_time_window(
            fluid, solid, states[-1].area, coupling, context=context, accelerator=accelerator
        )
        states.append(
            FieldState(
                pressure=result.pressure,
                velocity=fluid.last_result.state.velocity,
                area=result.area,
            )
        )
        iterations.append(result.iterations)

    traj = Trajectory(dt=dt, states=tuple(states), grid=grid)
    return SimulationResult(trajectory=traj, window_iterations=tuple(iterations))

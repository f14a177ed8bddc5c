"""Implicit 1D fluid solver for the elastic-tube benchmark.

Given the wall geometry (area field) at the new time level, solves the
discretized quasi-2D continuity and momentum equations for pressure and
velocity with a Newton iteration. Discretization: backward Euler in time,
second-order central differences in space, Dirichlet inlet velocity and
outlet pressure with one-sided first-order closures, and an optional
pressure-stabilization term in the continuity rows (collocated equal-order
(p, v) grids are checkerboard-unstable without it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import FieldState, FluidParams, Grid1D
from .errors import NonConvergenceError

__all__ = [
    "NewtonConfig",
    "FluidStepResult",
    "inlet_velocity",
    "assemble_residual",
    "assemble_jacobian",
    "solve_fluid_step",
    "mass_balance",
]


@dataclass(frozen=True)
class NewtonConfig:
    """Newton iteration controls for one fluid step."""

    tol: float = 1e-10
    max_iters: int = 100
    jacobian_mode: str = "finite-difference"  # or "analytic"
    fd_step: float = 1e-8
    stabilization: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.jacobian_mode not in ("finite-difference", "analytic"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")


@dataclass(frozen=True)
class FluidStepResult:
    state: FieldState
    newton_iters: int
    final_residual: float


def inlet_velocity(t: float, params: FluidParams) -> float:
    """Pulsatile inlet forcing v0 + dv*sin(pi*t/T)**2; smooth and periodic."""
    return params.inlet_v0 + params.inlet_dv * math.sin(math.pi * t / params.pulse_period) ** 2


def _stabilization_weight(prev: FieldState, dt: float, grid: Grid1D, params: FluidParams) -> float:
    # Scaled to vanish as dx -> 0; c_ref keeps the weight finite at rest.
    c_ref = float(np.max(np.abs(prev.velocity))) + 1.0
    return grid.dx / (dt * params.density * c_ref)


def assemble_residual(
    prev: FieldState,
    p: np.ndarray,
    v: np.ndarray,
    a_new: np.ndarray,
    dt: float,
    grid: Grid1D,
    params: FluidParams,
    t_new: float,
    stabilization: bool = True,
) -> np.ndarray:
    """Residual vector [continuity rows; momentum rows], length 2*n_points.

    ``p`` and ``v`` are the new-level guess; ``a_new`` is the prescribed
    new-level area. Boundary rows: one-sided continuity at node 0 and the
    inlet velocity Dirichlet condition; outlet pressure Dirichlet and
    one-sided momentum at the last node.
    """
    a = np.asarray(a_new, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = grid.n_points
    if not (a.shape == p.shape == v.shape == (n,)):
        raise ValueError(
            f"fields must have shape ({n},), got a {a.shape}, p {p.shape}, v {v.shape}"
        )
    if (a <= 0).any():
        raise ValueError("a_new must be strictly positive at every node")

    dx = grid.dx
    rho = params.density
    s = _stabilization_weight(prev, dt, grid, params) if stabilization else 0.0

    av = a * v
    av2 = av * v
    ap = a * p
    av_old = prev.area * prev.velocity

    r_c = np.empty(n)
    r_m = np.empty(n)

    r_c[0] = (a[0] - prev.area[0]) / dt + (av[1] - av[0]) / dx
    r_c[1:-1] = (
        (a[1:-1] - prev.area[1:-1]) / dt
        + (av[2:] - av[:-2]) / (2.0 * dx)
        - s * (p[:-2] - 2.0 * p[1:-1] + p[2:])
    )
    r_c[-1] = p[-1] - params.outlet_pressure

    r_m[0] = v[0] - inlet_velocity(t_new, params)
    r_m[1:-1] = (
        (av[1:-1] - av_old[1:-1]) / dt
        + (av2[2:] - av2[:-2]) / (2.0 * dx)
        + ((ap[2:] - ap[:-2]) / (2.0 * dx) - p[1:-1] * (a[2:] - a[:-2]) / (2.0 * dx)) / rho
    )
    r_m[-1] = (
        (av[-1] - av_old[-1]) / dt
        + (av2[-1] - av2[-2]) / dx
        + ((ap[-1] - ap[-2]) / dx - p[-1] * (a[-1] - a[-2]) / dx) / rho
    )

    return np.concatenate([r_c, r_m])


def assemble_jacobian(
    prev: FieldState,
    p: np.ndarray,
    v: np.ndarray,
    a_new: np.ndarray,
    dt: float,
    grid: Grid1D,
    params: FluidParams,
    stabilization: bool = True,
) -> np.ndarray:
    """Analytic Jacobian of :func:`assemble_residual` wrt [p; v]."""
    a = np.asarray(a_new, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = grid.n_points
    dx = grid.dx
    rho = params.density
    s = _stabilization_weight(prev, dt, grid, params) if stabilization else 0.0

    jac = np.zeros((2 * n, 2 * n))
    idx = np.arange(1, n - 1)

    # Continuity rows (block row 0): d/dv and d/dp.
    jac[0, n + 1] = a[1] / dx
    jac[0, n + 0] = -a[0] / dx
    jac[idx, n + idx + 1] = a[idx + 1] / (2.0 * dx)
    jac[idx, n + idx - 1] = -a[idx - 1] / (2.0 * dx)
    jac[idx, idx - 1] += -s
    jac[idx, idx] += 2.0 * s
    jac[idx, idx + 1] += -s
    jac[n - 1, n - 1] = 1.0

    # Momentum rows (block row 1).
    jac[n, n] = 1.0
    jac[n + idx, n + idx] = a[idx] / dt
    jac[n + idx, n + idx + 1] += a[idx + 1] * v[idx + 1] / dx
    jac[n + idx, n + idx - 1] += -a[idx - 1] * v[idx - 1] / dx
    jac[n + idx, idx + 1] = a[idx + 1] / (2.0 * dx * rho)
    jac[n + idx, idx - 1] = -a[idx - 1] / (2.0 * dx * rho)
    jac[n + idx, idx] = -(a[idx + 1] - a[idx - 1]) / (2.0 * dx * rho)
    jac[2 * n - 1, 2 * n - 1] = a[-1] / dt + 2.0 * a[-1] * v[-1] / dx
    jac[2 * n - 1, 2 * n - 2] = -2.0 * a[-2] * v[-2] / dx
    jac[2 * n - 1, n - 1] = (a[-1] - (a[-1] - a[-2])) / (dx * rho)
    jac[2 * n - 1, n - 2] = -a[-2] / (dx * rho)

    return jac


def _fd_jacobian(residual_fn, u: np.ndarray, r0: np.ndarray, fd_step: float) -> np.ndarray:
    m = u.size
    jac = np.empty((m, m))
    for j in range(m):
        h = fd_step * max(1.0, abs(u[j]))
        up = u.copy()
        up[j] += h
        jac[:, j] = (residual_fn(up) - r0) / h
    return jac


def solve_fluid_step(
    prev: FieldState,
    a_new: np.ndarray,
    dt: float,
    grid: Grid1D,
    params: FluidParams,
    cfg: NewtonConfig,
    t_new: float,
) -> FluidStepResult:
    """Solve one backward-Euler fluid step for (p, v) given the new area.

    ``newton_iters`` counts residual evaluations; a guess that already
    satisfies the tolerance returns after one evaluation.
    """
    n = grid.n_points
    u = np.concatenate([prev.pressure, prev.velocity]).astype(np.float64)

    def residual(uvec):
        return assemble_residual(
            prev, uvec[:n], uvec[n:], a_new, dt, grid, params, t_new,
            stabilization=cfg.stabilization,
        )

    trace = []
    r = residual(u)
    iters = 1
    res_norm = float(np.max(np.abs(r)))
    trace.append(res_norm)
    while res_norm > cfg.tol:
        if not np.isfinite(res_norm):
            raise NonConvergenceError(
                f"fluid residual became non-finite at iteration {iters}", trace=trace
            )
        if iters >= cfg.max_iters:
            raise NonConvergenceError(
                f"fluid Newton exceeded {cfg.max_iters} iterations "
                f"(residual {res_norm:.3e}, tol {cfg.tol:.3e})",
                trace=trace,
            )
        if cfg.jacobian_mode == "analytic":
            jac = assemble_jacobian(
                prev, u[:n], u[n:], a_new, dt, grid, params, stabilization=cfg.stabilization
            )
        else:
            jac = _fd_jacobian(residual, u, r, cfg.fd_step)
        try:
            du = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(f"singular fluid Jacobian: {exc}", trace=trace)
        # Backtracking line search: the convective terms make full Newton
        # steps overshoot when the update is large; halve until the
        # residual actually decreases (or accept the floor step).
        alpha = 1.0
        u_trial = u + du
        r_trial = residual(u_trial)
        trial_norm = float(np.max(np.abs(r_trial)))
        while trial_norm >= res_norm and np.isfinite(res_norm) and alpha > 1.0 / 64.0:
            alpha *= 0.5
            u_trial = u + alpha * du
            r_trial = residual(u_trial)
            trial_norm = float(np.max(np.abs(r_trial)))
        u = u_trial
        r = r_trial
        iters += 1
        res_norm = trial_norm
        trace.append(res_norm)

    state = FieldState(pressure=u[:n].copy(), velocity=u[n:].copy(), area=np.asarray(a_new, dtype=np.float64).copy())
    return FluidStepResult(state=state, newton_iters=iters, final_residual=res_norm)


def mass_balance(
    prev: FieldState,
    new: FieldState,
    dt: float,
    grid: Grid1D,
    params: FluidParams,
    stabilization: bool = True,
) -> tuple[float, float]:
    """Both sides of the telescoped discrete mass-balance identity.

    Summing the continuity rows with weights (1/2, 1, ..., 1, 0) telescopes
    the central fluxes to the boundaries:

        sum_i w_i (a_i^{n+1} - a_i^n) dx = dt*(Q_in - Q_out) + dt*S_stab

    with Q_in = (a v)_0, Q_out = ((a v)_{N-1} + (a v)_{N-2})/2 at the new
    level, and S_stab the boundary pressure differences left over from the
    stabilization term. Returns (lhs, rhs); they agree to the depth the
    Newton iteration converged.
    """
    dx = grid.dx
    n = grid.n_points
    w = np.ones(n)
    w[0] = 0.5
    w[-1] = 0.0
    lhs = float(np.sum(w * (new.area - prev.area)) * dx)

    flux = new.area * new.velocity
    q_in = flux[0]
    q_out = 0.5 * (flux[-1] + flux[-2])
    s = _stabilization_weight(prev, dt, grid, params) if stabilization else 0.0
    p = new.pressure
    s_stab = s * dx * ((p[0] - p[1]) + (p[-1] - p[-2]))
    rhs = float(dt * (q_in - q_out) + dt * s_stab)
    return lhs, rhs

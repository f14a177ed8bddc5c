"""In-process serial implicit coupling with quasi-Newton acceleration.

Replicates the role of an FSI coupling library for matching interface
grids: a participant abstraction, a Gauss-Seidel implicit fixed-point loop
per time window, a relative convergence measure, constant under-relaxation,
and interface quasi-Newton acceleration of IQN-ILS type (inverse Jacobian
from least squares over residual/value difference columns).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import CouplingDivergenceError

__all__ = [
    "Participant",
    "WindowContext",
    "CouplingConfig",
    "IqnHistory",
    "WindowResult",
    "convergence_measure",
    "constant_relaxation",
    "iqn_ils_step",
    "make_accelerator",
    "ConstantRelaxationAccelerator",
    "IqnIlsAccelerator",
    "run_time_window",
]

# Below this 2-norm the convergence reference is treated as zero and the
# measure falls back to the absolute residual norm.
_REFERENCE_FLOOR = 1e-30


class Participant(Protocol):
    """One side of the coupled problem.

    The fluid participant maps an interface area vector to a pressure
    vector; the solid participant maps pressure to area. Participants must
    not retain mutable state across solve calls except through the window
    context.
    """

    def solve(self, interface: np.ndarray, context: "WindowContext") -> np.ndarray: ...


@dataclass(frozen=True)
class WindowContext:
    """Time-window information handed to participants."""

    t_new: float
    dt: float
    window_index: int


@dataclass(frozen=True)
class CouplingConfig:
    tol: float = 1e-6
    max_iters: int = 100
    accelerator: str = "iqn-ils"  # or "constant-relaxation"
    omega0: float = 0.1
    max_columns: int = 20
    filter_eps: float = 1e-7
    reuse_windows: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not 0.0 < self.omega0 <= 1.0:
            raise ValueError(f"omega0 must lie in (0, 1], got {self.omega0}")
        if self.max_columns < 1:
            raise ValueError(f"max_columns must be at least 1, got {self.max_columns}")
        if self.accelerator not in ("iqn-ils", "constant-relaxation"):
            raise ValueError(f"unknown accelerator {self.accelerator!r}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.reuse_windows < 0:
            raise ValueError(f"reuse_windows must be non-negative, got {self.reuse_windows}")


@dataclass
class IqnHistory:
    """Residual-difference (V) and value-difference (W) columns.

    Columns are consecutive differences of the residual and surrogate-value
    iterates; ``window_ids`` tags each column with the time window that
    produced it so stale columns can be dropped on reuse.
    """

    V: list = field(default_factory=list)
    W: list = field(default_factory=list)
    window_ids: list = field(default_factory=list)
    r_prev: np.ndarray | None = None
    xt_prev: np.ndarray | None = None

    @property
    def n_columns(self) -> int:
        return len(self.V)

    def copy(self) -> "IqnHistory":
        return IqnHistory(
            V=list(self.V),
            W=list(self.W),
            window_ids=list(self.window_ids),
            r_prev=None if self.r_prev is None else self.r_prev.copy(),
            xt_prev=None if self.xt_prev is None else self.xt_prev.copy(),
        )


def convergence_measure(residual, reference, tol: float):
    """Relative 2-norm of the residual, with an absolute fallback.

    Returns ``(value, converged)`` where value = |residual| / |reference|
    when the reference norm exceeds 1e-30, otherwise the absolute norm.
    """
    residual = np.asarray(residual, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if residual.shape != reference.shape:
        raise ValueError(
            f"residual and reference lengths differ: {residual.shape} vs {reference.shape}"
        )
    res_norm = float(np.linalg.norm(residual))
    ref_norm = float(np.linalg.norm(reference))
    value = res_norm / ref_norm if ref_norm > _REFERENCE_FLOOR else res_norm
    return value, value <= tol


def constant_relaxation(x_k, x_tilde, omega: float):
    """Damped fixed-point update x + omega*(x_tilde - x)."""
    x_k = np.asarray(x_k, dtype=np.float64)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    if x_k.shape != x_tilde.shape:
        raise ValueError(f"length mismatch: {x_k.shape} vs {x_tilde.shape}")
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    return x_k + omega * (x_tilde - x_k)


def _filtered_lstsq(V: np.ndarray, W: np.ndarray, r: np.ndarray, filter_eps: float):
    """Solve min |V lam + r| by QR, dropping near-collinear columns.

    Columns whose QR diagonal magnitude falls below filter_eps * |V| are
    removed in one pass before the solve. Returns W @ lam, or None when
    every column was filtered out.
    """
    scale = float(np.linalg.norm(V))
    if scale == 0.0:
        return None
    _, rmat = np.linalg.qr(V)
    diag = np.abs(np.diag(rmat))
    # Columns beyond the row count are linearly dependent by construction.
    keep = np.zeros(V.shape[1], dtype=bool)
    keep[: diag.size] = diag >= filter_eps * scale
    if not keep.any():
        return None
    if not keep.all():
        V = V[:, keep]
        W = W[:, keep]
    q, rmat = np.linalg.qr(V)
    try:
        lam = np.linalg.solve(rmat, -(q.T @ r))
    except np.linalg.LinAlgError:
        return None
    return W @ lam


def iqn_ils_step(history: IqnHistory, x_k, x_tilde_k, cfg: CouplingConfig, window_index: int = 0):
    """One IQN-ILS update: returns (x_next, updated history).

    The residual is r = x_tilde - x. With an empty history the update is
    constant relaxation with cfg.omega0; otherwise the least-squares
    combination of the stored columns is applied: x_next = x_tilde + W lam
    with lam = argmin |V lam + r|. A least-squares breakdown after
    filtering falls back to constant relaxation.
    """
    x_k = np.asarray(x_k, dtype=np.float64)
    x_tilde_k = np.asarray(x_tilde_k, dtype=np.float64)
    if x_k.shape != x_tilde_k.shape:
        raise ValueError(f"length mismatch: {x_k.shape} vs {x_tilde_k.shape}")
    if not (np.isfinite(x_k).all() and np.isfinite(x_tilde_k).all()):
        raise FloatingPointError("non-finite interface values in quasi-Newton step")

    r = x_tilde_k - x_k
    if not r.any():
        # Exact fixed point: nothing to learn, nothing to update.
        return x_tilde_k.copy(), history

    history = history.copy()
    if history.r_prev is not None:
        history.V.append(history.r_prev - r)
        history.W.append(history.xt_prev - x_tilde_k)
        history.window_ids.append(window_index)
        while history.n_columns > cfg.max_columns:
            history.V.pop(0)
            history.W.pop(0)
            history.window_ids.pop(0)
    history.r_prev = r.copy()
    history.xt_prev = x_tilde_k.copy()

    if history.n_columns == 0:
        return constant_relaxation(x_k, x_tilde_k, cfg.omega0), history

    vmat = np.column_stack(history.V)
    wmat = np.column_stack(history.W)
    update = _filtered_lstsq(vmat, wmat, r, cfg.filter_eps)
    if update is None:
        return constant_relaxation(x_k, x_tilde_k, cfg.omega0), history
    return x_tilde_k + update, history


class ConstantRelaxationAccelerator:
    """Stateless constant under-relaxation."""

    def __init__(self, cfg: CouplingConfig):
        self.cfg = cfg

    def begin_window(self, window_index: int) -> None:
        pass

    def update(self, x_k: np.ndarray, x_tilde_k: np.ndarray) -> np.ndarray:
        return constant_relaxation(x_k, x_tilde_k, self.cfg.omega0)


class IqnIlsAccelerator:
    """IQN-ILS with per-window history reset and optional column reuse."""

    def __init__(self, cfg: CouplingConfig):
        self.cfg = cfg
        self.history = IqnHistory()
        self._window_index = 0

    def begin_window(self, window_index: int) -> None:
        self._window_index = window_index
        # Secants never pair across window boundaries.
        self.history.r_prev = None
        self.history.xt_prev = None
        cutoff = window_index - self.cfg.reuse_windows
        keep = [i for i, wid in enumerate(self.history.window_ids) if wid >= cutoff]
        self.history.V = [self.history.V[i] for i in keep]
        self.history.W = [self.history.W[i] for i in keep]
        self.history.window_ids = [self.history.window_ids[i] for i in keep]

    def update(self, x_k: np.ndarray, x_tilde_k: np.ndarray) -> np.ndarray:
        x_next, self.history = iqn_ils_step(
            self.history, x_k, x_tilde_k, self.cfg, window_index=self._window_index
        )
        return x_next


def make_accelerator(cfg: CouplingConfig):
    if cfg.accelerator == "iqn-ils":
        return IqnIlsAccelerator(cfg)
    return ConstantRelaxationAccelerator(cfg)


@dataclass(frozen=True)
class WindowResult:
    pressure: np.ndarray
    area: np.ndarray
    iterations: int
    residuals: tuple


def run_time_window(
    fluid: Participant,
    solid: Participant,
    a_init: np.ndarray,
    cfg: CouplingConfig,
    context: WindowContext | None = None,
    accelerator=None,
) -> WindowResult:
    """Serial implicit loop for one time window.

    Per iteration: p <- fluid.solve(a); a~ <- solid.solve(p); the coupling
    residual is the change of the solid output between iterations (against
    ``a_init`` on the first), measured relative to the current solid output.
    Acceleration is applied to the area vector only.
    """
    if context is None:
        context = WindowContext(t_new=0.0, dt=1.0, window_index=0)
    if accelerator is None:
        accelerator = make_accelerator(cfg)
        accelerator.begin_window(context.window_index)

    a = np.asarray(a_init, dtype=np.float64)
    a_tilde_prev = None
    residuals = []
    for iteration in range(1, cfg.max_iters + 1):
        p = np.asarray(fluid.solve(a, context), dtype=np.float64)
        a_tilde = np.asarray(solid.solve(p, context), dtype=np.float64)
        if a_tilde.shape != a.shape:
            raise ValueError(
                f"solid output length {a_tilde.shape} does not match interface {a.shape}"
            )
        reference = a_tilde_prev if a_tilde_prev is not None else a_init
        value, converged = convergence_measure(a_tilde - reference, a_tilde, cfg.tol)
        residuals.append(value)
        if converged:
            return WindowResult(
                pressure=p, area=a_tilde, iterations=iteration, residuals=tuple(residuals)
            )
        a = accelerator.update(a, a_tilde)
        a_tilde_prev = a_tilde
    raise CouplingDivergenceError(
        f"coupling exceeded {cfg.max_iters} iterations in window {context.window_index} "
        f"(last residual {residuals[-1]:.3e}, tol {cfg.tol:.3e})",
        residuals=residuals,
        window=context.window_index,
    )

"""Exception types shared across the package."""


class TubeflowError(Exception):
    """Base class for all package-specific errors."""


class TrajectoryParseError(TubeflowError):
    """Raised when a trajectory CSV file is malformed.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class WallBlowUpError(TubeflowError):
    """Pressure at or beyond the singular pressure of the tube law."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NonConvergenceError(TubeflowError):
    """Newton iteration failed to reach tolerance.

    ``trace`` holds the residual infinity norm per iteration.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class CouplingDivergenceError(TubeflowError):
    """Implicit coupling loop exhausted max_iters.

    ``residuals`` holds the convergence-measure value per iteration.
    """

    def __init__(self, message, residuals=(), window=None):
        super().__init__(message)
        self.residuals = list(residuals)
        self.window = window


class CheckpointError(TubeflowError):
    """Network checkpoint file is unreadable or inconsistent."""


class TrainingError(TubeflowError):
    """Training loss became non-finite."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class InsufficientDataError(TubeflowError):
    """Trajectory too short for the requested window length."""


class RolloutError(TubeflowError):
    """Coupling diverged during autoregressive rollout.

    ``step`` is the failing prediction step; ``partial`` the trajectory
    built so far.
    """

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class ConfigError(TubeflowError):
    """Configuration file is malformed or violates an invariant."""

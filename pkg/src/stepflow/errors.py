"""Exception types shared across the package."""


class StepflowError(Exception):
    """Base class for all stepflow-specific errors."""


class ConfigError(StepflowError):
    """Invalid configuration file or inconsistent run parameters."""


class GridError(StepflowError):
    """Grid cannot be built from the requested geometry/step combination."""


class BlowUpError(StepflowError):
    """The solution left the finite/physical range; the run is diverged."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class PressureConvergenceError(StepflowError):
    """The iterative pressure solve stopped above tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad run configuration: unknown keys, wrong types, inconsistent values."""


class NumericalError(RuntimeError):
    """A numerical procedure left its validated regime."""


class IllConditionedError(NumericalError):
    """Transfer-matrix product or interface system too ill-conditioned to trust."""


class ConvergenceError(NumericalError):
    """Grid refinement or iteration failed to reach the requested tolerance."""


class DefectiveSegmentError(NumericalError):
    """Segment coupling matrix is (numerically) defective; eigenmode propagation invalid."""


class OptimizationError(NumericalError):
    """No restart produced a feasible converged optimum."""

    def __init__(self, message, restarts=0):
        super().__init__(message)
        self.restarts = restarts

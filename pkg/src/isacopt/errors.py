"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration input."""


class SolverError(RuntimeError):
    """Base class for numerical-solver failures."""


class DykstraError(SolverError):
    """Cyclic projection failed to reach the requested feasibility tolerance."""

    def __init__(self, message: str, worst_violation: float):
        super().__init__(message)
        self.worst_violation = worst_violation


class RandomizationInfeasibleError(SolverError):
    """No randomized precoder candidate satisfied the constraints."""


class MonotonicityError(SolverError):
    """An ascent-guaranteed iteration decreased the objective beyond slack."""

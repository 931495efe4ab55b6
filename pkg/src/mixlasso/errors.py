"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent with the declared model sizes."""


class DomainError(ValueError):
    """A numerical precondition fails, e.g. a covariance is not positive definite."""


class ConfigurationError(ValueError):
    """A configuration object is internally inconsistent or infeasible."""


class DegenerateComponentError(RuntimeError):
    """A mixture component received (numerically) zero total responsibility."""

    def __init__(self, component: int, total: float):
        self.component = component
        self.total = total
        super().__init__(
            f"component {component} is degenerate (total responsibility {total:.3e})"
        )


class ReplicateError(RuntimeError):
    """A replicate of an experiment failed; carries the index and seed for replay."""

    def __init__(self, replicate: int, seed: int, cause: Exception):
        self.replicate = replicate
        self.seed = seed
        self.cause = cause
        super().__init__(f"replicate {replicate} (seed {seed}) failed: {cause}")

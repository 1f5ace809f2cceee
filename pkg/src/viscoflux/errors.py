"""Exception types. The CLI maps each family onto a stable exit code."""


class ConfigError(ValueError):
    """Invalid configuration, grid or parameter set."""


class MeanNonZeroError(ValueError):
    """Raised when a homogeneous operator receives a field with a zero mode."""

    def __init__(self, what="homogeneous norm undefined at ξ = 0"):
        super().__init__(what)


class GridMismatchError(ValueError):
    pass


class VacuumError(ValueError):
    """Density perturbation reached a <= -1 (rho <= 0)."""


class SingularDeformationError(ValueError):
    """det F fell below the configured guard."""


class BlowUpError(RuntimeError):
    """Solution left the admissible set (det F or density guard tripped)."""


class InstabilityError(RuntimeError):
    """Non-finite values detected during time stepping."""

"""Pseudo-spectral lab for compressible Oldroyd-type viscoelastic flows on the torus."""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    ConfigError,
    GridMismatchError,
    InstabilityError,
    MeanNonZeroError,
    SingularDeformationError,
    VacuumError,
)
from .grid import FrequencyGrid, SpectralField  # noqa: E402
from .model import FluidParams, PerturbationState, PrimitiveState  # noqa: E402
from .solver import InitSpec, SimConfig, simulate  # noqa: E402

__all__ = [
    "__version__",
    "BlowUpError",
    "ConfigError",
    "GridMismatchError",
    "InstabilityError",
    "MeanNonZeroError",
    "SingularDeformationError",
    "VacuumError",
    "FrequencyGrid",
    "SpectralField",
    "FluidParams",
    "PerturbationState",
    "PrimitiveState",
    "InitSpec",
    "SimConfig",
    "simulate",
]

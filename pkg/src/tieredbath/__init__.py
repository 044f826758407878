"""Influence-functional dynamics of a discrete quantum system weakly
coupled to a two-tiered bosonic environment (damped modes and/or smooth
baths), with an exact truncated-Fock Lindblad benchmark and the standard
weak-coupling master equation for comparison."""

__version__ = "0.1.0"

from .bath import (  # noqa: F401
    DampedMode,
    DiscreteSet,
    KernelSamples,
    OhmicFamily,
    Tabulated,
    ThermalParams,
    frequency_quadrature,
    kernel,
    thermal_occupation,
)
from .errors import (  # noqa: F401
    CapabilityError,
    ConfigurationError,
    DegenerateKernelError,
    NumericalError,
    TieredBathError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .influence import (  # noqa: F401
    InfluenceMatrix,
    ReducedTrajectory,
    SystemModel,
    evolve,
    propagator,
    propagator_grid,
    reorg_times,
    steady_state_spinboson,
    theta_quadrature,
    theta_spinboson,
)
from .su_basis import (  # noqa: F401
    PVector,
    SuBasis,
    build_basis,
    build_hcross,
    build_vcirc,
    build_vcross,
    devectorize,
    vectorize,
)

"""Simulator and estimate checker for the self-gravitating equivariant
wave-map system in its 4+1 radial reduction."""

from .errors import (
    NanDetected,
    NonConvergence,
    NonPositiveRadius,
    QuadratureFailure,
    SimulationError,
)
from .model import (
    ProblemMode,
    ProfileConfig,
    RunConfig,
    TargetGeometry,
    make_flat_target,
    make_hyperbolic_target,
    make_polynomial_target,
    make_target,
    validate_config,
)
from .grid import (
    FieldState,
    RadialGrid,
    build_initial_data,
    constraint_residuals,
    flat_vacuum,
    null_derivatives,
    read_snapshot,
    write_snapshot,
)
from .evolve import RunSummary, box4p1, metric_rhs, nonlinearity, run, step
from .linprop import (
    HankelPlan,
    SpectralField,
    get_plan,
    propagate_integral,
    propagate_spectral,
    scattering_pullback,
)
from .lpnorms import DyadicBump, SpaceTimeTrace, default_bump, project, x_norm, y_norm_upper
from . import diagnostics

__version__ = "0.1.0"

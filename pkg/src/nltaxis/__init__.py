"""Nonlocal adhesion/taxis operators and a 1D finite-volume taxis solver."""

__version__ = "0.1.0"

from .errors import ConfigurationError, GridMismatchError, SnapshotError  # noqa: E402,F401
from .grid import (  # noqa: E402,F401
    Grid1D,
    InteriorMask,
    ScalarField,
    eval_extended,
    integrate as integrate_field,
    interior_mask,
    make_grid,
)
from .operators import (  # noqa: E402,F401
    ADHESION_VELOCITY,
    BALL_AVERAGE,
    NONLOCAL_GRADIENT,
    WINDOW_AVERAGE,
    DiscreteNonlocalOperator,
    KernelF,
    Regularizer,
    apply,
    build_operator,
    constant_kernel,
    dense_apply,
    exponential_kernel,
    gradient_field,
    norm_bound_c2,
    operator_norm,
)
from .models import (  # noqa: E402,F401
    CoefficientSet,
    EffectiveLocalCoefficients,
    WellposednessReport,
    build_custom,
    build_preset,
    effective_coeffs,
    validate_wellposedness,
)
from .solver import (  # noqa: E402,F401
    LOCAL,
    NONLOCAL_ADHESION,
    NONLOCAL_BALL,
    NONLOCAL_WINDOW,
    Formulation,
    RunResult,
    SimState,
    SolverConfig,
    initial_conditions,
    integrate,
    restore_state,
    save_state,
)
from .analysis import (  # noqa: E402,F401
    ComparisonReport,
    DistanceCurve,
    SweepReport,
    SymbolProfile,
    aggregate_count,
    boundary_layer_comparison,
    convergence_sweep,
    distance,
    fourier_symbol,
)

"""Numerical toolkit for KdV with step-like (tidal) backgrounds and its H_kappa approximations."""

from .background import PeriodizedBackground, StepProfile, default_return_center, eval_profile, periodize
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DivergenceError,
    ParameterError,
    RejectedInputError,
    ResolutionError,
    SpectralConditionError,
    TidalKdVError,
    ValidityError,
)
from .flows import (
    FlowSpec,
    FlowState,
    IntegratorConfig,
    PotentialHistory,
    Trajectory,
    commuting_composition,
    evolve,
    linear_symbol,
    rhs,
    soliton,
)
from .schrodinger import (
    GreensDiagonal,
    JostPair,
    SchrodingerProblem,
    compute_alpha,
    compute_hkappa_functional,
    diagonal_green,
    greens_ode_residual,
    hilbert_schmidt_check,
    jost_pair,
    kdv_hamiltonian,
    momentum,
    verify_linear_identity,
    verify_quadratic_identity,
)
from .spectral_grid import (
    Field,
    Grid,
    Multiplier,
    derivative,
    hs_kappa_norm,
    l2_norm,
    littlewood_paley,
    m_hi,
    m_lo,
    project_pi,
    sobolev_norm,
)

__version__ = "0.1.0"

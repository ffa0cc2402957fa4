"""Random fields under volatility uncertainty.

Library + CLI laboratory: closed-form sublinear functions and scenario
Monte Carlo, a nonlinear-PDE distributional oracle, interval Hilbert-space
plumbing, uncertain spacetime noise with stochastic integration, and two
coupled solvers for the damped stochastic heat equation.
"""

from .errors import GFieldLabError, ConfigError, SpaceMismatchError, CheckFailure
from .scenarios import (
    VolBand,
    ScenarioPath,
    GFunction,
    SublinearEstimate,
    g_scalar,
    g_matrix,
    check_compatibility,
    sup_expectation,
    lower_expectation,
    chebyshev_capacity_check,
    bang_bang_scenarios,
    constant_scenarios,
    constant_scenario,
    gnormal_terminal_sampler,
)
from .gheat import PayoffSpec, PDEGrid, solve_gheat_1d, solve_gheat_2d, gnormal_abs_moment
from .hilbert import (
    MeasureSpace,
    Basis,
    L2Element,
    HSOperator,
    cosine_basis,
    full_trig_basis,
    inner,
    gram,
    coeffs,
    reconstruct,
    parseval_defect,
    hs_apply,
    hs_one_over_n,
    hs_identity,
)
from .field import (
    FieldDistribution,
    SetFamily,
    ExpansionSurrogate,
    fdd,
    sample_given_theta,
    expansion_surrogate,
    union_identity_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

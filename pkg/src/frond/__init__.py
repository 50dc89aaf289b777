"""Fractional-order graph dynamics: Caputo solvers, Mittag-Leffler bounds, robustness experiments."""

__version__ = "0.1.0"

from .errors import FrondError
from .fde_solver import FdeConfig, Trajectory, ab_coefficient, coefficient_row, solve_fde, solve_fde_pair
from .graph_dynamics import (
    AttentionParams,
    DynamicsSpec,
    Graph,
    attention_matrix,
    graphbel_rhs,
    graphcon_rhs,
    grand_rhs,
    init_dynamics,
    lipschitz_estimate,
)
from .robustness_lab import (
    DeviationReport,
    PerturbationSpec,
    beta_sweep,
    deviation_experiment,
    functional_epsilon,
    perturb_features,
    perturb_topology,
)
from .special_fn import MlfParams, bound_monotonicity_scan, gamma_fn, mlf, mlf_bound

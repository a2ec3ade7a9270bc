"""Lasso and Slope estimators with their oracle-inequality bounds."""
from .bounds import (
    BoundParams,
    BoundReport,
    c_gamma_tau,
    c_prime_gamma_tau,
    event_functionals,
    lasso_bound_rhs,
    slope_bound_rhs,
)
from .norms import WeightSchedule, best_s_term_error_star, sorted_l1_norm
from .prox import prox_sorted_l1
from .re_conditions import SearchConfig, estimate_nu_q, estimate_theta_q
from .solvers import ProblemInstance, SolverConfig, lasso_fit, slope_fit
from .weights import SlopeWeightConfig, lasso_lambda_min, slope_weights

__all__ = [
    "BoundParams",
    "BoundReport",
    "ProblemInstance",
    "SearchConfig",
    "SlopeWeightConfig",
    "SolverConfig",
    "WeightSchedule",
    "best_s_term_error_star",
    "c_gamma_tau",
    "c_prime_gamma_tau",
    "estimate_nu_q",
    "estimate_theta_q",
    "event_functionals",
    "lasso_bound_rhs",
    "lasso_fit",
    "lasso_lambda_min",
    "prox_sorted_l1",
    "slope_bound_rhs",
    "slope_fit",
    "slope_weights",
    "sorted_l1_norm",
]

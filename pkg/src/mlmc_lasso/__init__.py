"""Bayesian Lasso sampling with a Langevin diffusion whose drift contains the
subdifferential of the l1 norm.

Three time discretizations (SIES, EES1, EES2) feed plain Monte Carlo,
multilevel Monte Carlo and Metropolis-Hastings estimators of the posterior
mean, together with their cost planners.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import ConfigError, ConvergenceError, PlanningError, StreamExhausted
from .model import (
    KktCertificate,
    ObjectiveValue,
    ProblemInstance,
    generate_problem,
    kkt_check,
    lasso_solve,
    log_posterior_unnorm,
    objective,
)
from .schemes import LevelGrid, SchemeKind

__all__ = [
    "BACKEND",
    "ConfigError",
    "ConvergenceError",
    "KktCertificate",
    "LevelGrid",
    "ObjectiveValue",
    "PlanningError",
    "ProblemInstance",
    "SchemeKind",
    "StreamExhausted",
    "__version__",
    "generate_problem",
    "kkt_check",
    "lasso_solve",
    "log_posterior_unnorm",
    "objective",
]

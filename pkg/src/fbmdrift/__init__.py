"""Least-squares drift estimation for SDEs driven by fractional Brownian motion."""

__version__ = "0.1.0"

from .fbm import HurstParameter, TimeGrid, covariance, increment_covariance, sample_fbm, sample_fbm_batch
from .sde import DriftModel, certify_hypotheses, get_model, integrate_euler
from .malliavin import propagate_derivative, skorohod_integral
from .estimator import EstimateResult, estimate, ergodic_average, gram_matrix

__all__ = [
    "__version__",
    "HurstParameter",
    "TimeGrid",
    "covariance",
    "increment_covariance",
    "sample_fbm",
    "sample_fbm_batch",
    "DriftModel",
    "certify_hypotheses",
    "get_model",
    "integrate_euler",
    "propagate_derivative",
    "skorohod_integral",
    "EstimateResult",
    "estimate",
    "ergodic_average",
    "gram_matrix",
]

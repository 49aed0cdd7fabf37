"""Sparse semi-functional partial linear single-index regression."""
from .estimator import FitConfig, FitResult, fit_ssfplsim
from .functional import FunctionalSample, Grid, build_bspline_basis, calibrate_direction
from .link import LinkModel, estimate_link, predict

__version__ = "0.1.0"

__all__ = [
    "FitConfig",
    "FitResult",
    "fit_ssfplsim",
    "FunctionalSample",
    "Grid",
    "build_bspline_basis",
    "calibrate_direction",
    "LinkModel",
    "estimate_link",
    "predict",
]

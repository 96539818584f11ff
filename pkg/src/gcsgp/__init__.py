"""Gaussian-process regression on mixed continuous/categorical inputs with group-structured
(generalized compound symmetry) covariance matrices for the categorical levels."""

__version__ = "0.1.0"

from .data import Dataset, InputSchema, read_csv, write_csv
from .exceptions import (
    CompositionError,
    DomainError,
    FitError,
    GCSError,
    InvalidParamsError,
    InvalidSpecError,
    MetricError,
    NumericalError,
)
from .gp import FitConfig, GPModel, fit, neg_log_likelihood, q2

__all__ = [
    "CompositionError",
    "Dataset",
    "DomainError",
    "FitConfig",
    "FitError",
    "GCSError",
    "GPModel",
    "InputSchema",
    "InvalidParamsError",
    "InvalidSpecError",
    "MetricError",
    "NumericalError",
    "__version__",
    "fit",
    "neg_log_likelihood",
    "q2",
    "read_csv",
    "write_csv",
]

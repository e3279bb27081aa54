"""Sparse partial-correlation graph estimation by pseudo-likelihood coordinate descent."""

from importlib.metadata import PackageNotFoundError, version

from .concord import Concord, ConcordConfig, FitResult, concord_fit, concord_objective
from .linalg import CovMatrix, Dataset, Standardizer, sample_covariance, soft_threshold, standardize
from .portfolio import RebalancePlan, ReturnsPanel, backtest, minvar_weights
from .selection import ConcordBIC, ConcordCV, default_grid, lambda_max, penalty_path
from .simulate import GroundTruth, gen_sparse_precision, roc_auc_partial, sample_gaussian, sample_mvt
from .space import Space, space_fit

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

__all__ = [
    "Concord",
    "ConcordBIC",
    "ConcordConfig",
    "ConcordCV",
    "CovMatrix",
    "Dataset",
    "FitResult",
    "GroundTruth",
    "RebalancePlan",
    "ReturnsPanel",
    "Space",
    "Standardizer",
    "backtest",
    "concord_fit",
    "concord_objective",
    "default_grid",
    "gen_sparse_precision",
    "lambda_max",
    "minvar_weights",
    "penalty_path",
    "roc_auc_partial",
    "sample_covariance",
    "sample_gaussian",
    "sample_mvt",
    "soft_threshold",
    "space_fit",
    "standardize",
]

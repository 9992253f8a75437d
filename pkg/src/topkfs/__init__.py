"""Top-k regularized feature selection for linear models and MLPs."""

from .data import Dataset, inject_noise_features, make_sparse_classification, make_sparse_regression
from .errors import ConfigError, InvalidArgumentError, NumericalError
from .linear import Hyperparams, LinearFit
from .mlp import MlpParams, TrainConfig, TrainResult
from .selection import SelectConfig, SelectionReport, select, stability, sweep_k
from .topk import ActiveSet, active_set, apply_mask, route_gradient, topk

__all__ = [
    "ActiveSet", "ConfigError", "Dataset", "Hyperparams", "InvalidArgumentError", "LinearFit",
    "MlpParams", "NumericalError", "SelectConfig", "SelectionReport", "TrainConfig", "TrainResult",
    "active_set", "apply_mask", "inject_noise_features", "make_sparse_classification",
    "make_sparse_regression", "route_gradient", "select", "stability", "sweep_k", "topk",
]

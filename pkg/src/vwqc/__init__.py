"""Quantile-based classification with variable-wise percentages and scales."""
from .dataset import Dataset, QuantileModel, load_csv, load_iris, load_model, save_model
from .estimator import VWQC, FitConfig, FitReport, decision_scores, fit, predict, psi

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "QuantileModel",
    "load_csv",
    "load_iris",
    "load_model",
    "save_model",
    "VWQC",
    "FitConfig",
    "FitReport",
    "decision_scores",
    "fit",
    "predict",
    "psi",
]

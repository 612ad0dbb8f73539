"""Bivariate copula survival models with bootstrap ranking-based variable selection."""

__version__ = "0.1.0"

from .algorithm import BrbvsConfig, BrbvsResult, run_brbvs, run_brbvs_metrics, select_size
from .data import ColumnSchema, Dataset, parse_dataset, standardize, write_dataset
from .fit import FitOptions, FittedModel, aic, bic, fit_model, summarize
from .likelihood import ModelSpec
from .simulate import SimConfig, evaluate, generate
from .stepwise import backward, forward, select_link

__all__ = [
    "BrbvsConfig", "BrbvsResult", "ColumnSchema", "Dataset", "FitOptions", "FittedModel",
    "ModelSpec", "SimConfig", "aic", "backward", "bic", "evaluate", "fit_model", "forward",
    "generate", "parse_dataset", "run_brbvs", "run_brbvs_metrics", "select_link", "select_size",
    "standardize", "summarize", "write_dataset",
]

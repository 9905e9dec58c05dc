"""Bayesian varying-effects regression with graph estimation."""

from .model import (
    ChainState,
    Dataset,
    Hyperparameters,
    KernelParams,
    Trace,
    default_hyperparameters,
    standardize,
)
from .sampler import MoveStats, RunConfig, run_chain, run_chains
from .summaries import SelectionReport, predict, summarize

__all__ = [
    "ChainState",
    "Dataset",
    "Hyperparameters",
    "KernelParams",
    "MoveStats",
    "RunConfig",
    "SelectionReport",
    "Trace",
    "default_hyperparameters",
    "predict",
    "run_chain",
    "run_chains",
    "standardize",
    "summarize",
]
__version__ = "0.1.0"

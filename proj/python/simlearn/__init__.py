"""Simultaneous learning: grouped loss, metrics and experiment runner."""

from ._simlearn import (
    ConfigError,
    InvalidArgument,
    IoError,
    ShapeError,
    accuracy,
    cce,
    dacc,
    group_penalty,
    lambda_sweep,
    mean_abs_correlation,
    roc_auc_ovr,
    run_experiment,
    sll,
    sll_grad_logits,
    wgcc,
)

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "IoError",
    "ShapeError",
    "accuracy",
    "cce",
    "dacc",
    "group_penalty",
    "lambda_sweep",
    "mean_abs_correlation",
    "roc_auc_ovr",
    "run_experiment",
    "sll",
    "sll_grad_logits",
    "wgcc",
]

"""Posterior predictive p-values for causal effects under unconfoundedness."""

from ._pppv import (
    PppvError,
    bootstrap_se,
    estimate,
    fit_logistic,
    frt,
    generate,
    ks_uniform,
    normal,
    ppp,
    run_study,
    sample_posterior,
)

__all__ = [
    "PppvError",
    "bootstrap_se",
    "estimate",
    "fit_logistic",
    "frt",
    "generate",
    "ks_uniform",
    "normal",
    "ppp",
    "run_study",
    "sample_posterior",
]

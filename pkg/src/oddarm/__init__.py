"""Odd-arm identification with exponential-family arms and switching costs."""

from .complexity import ArmConfiguration, ComplexityResult, solve_lambda_star
from .expfam import (
    Bernoulli,
    GaussianKnownVar,
    GaussianZeroMeanUnknownVar,
    HyperParams,
    InvalidParameterError,
    Poisson,
    VectorGaussian,
    make_family,
)
from .policy import PolicyConfig, SluggishGlrPolicy, Variant
from .sim import SwitchCostMatrix, run_batch, run_episode, sweep

__all__ = [
    "ArmConfiguration", "ComplexityResult", "solve_lambda_star",
    "Bernoulli", "GaussianKnownVar", "GaussianZeroMeanUnknownVar", "HyperParams",
    "InvalidParameterError", "Poisson", "VectorGaussian", "make_family",
    "PolicyConfig", "SluggishGlrPolicy", "Variant",
    "SwitchCostMatrix", "run_batch", "run_episode", "sweep",
]

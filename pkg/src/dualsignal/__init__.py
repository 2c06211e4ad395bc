"""Dual-signal (mean and dispersion) decomposition of stochastic time series."""

from .types import (
    BetaRule,
    ConfigurationError,
    DecompositionResult,
    DegenerateInputError,
    DualSignal,
    DualSignalError,
    Hyperparameters,
    InvalidInputError,
    NoiseSeries,
    OutOfDomainError,
    TimeSeries,
    TuningError,
    WeightScheme,
    first_diff,
    moving_range,
    second_diff,
)
from .optimizer import OptimizerConfig, beta_estimate, decompose, decompose_joint, decompose_sequential

__version__ = "0.1.0"

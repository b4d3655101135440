"""Benjamini-Hochberg style step-up procedures: rules, limits and simulation."""
from .distributions import (
    Ar1Copula,
    Degenerate,
    Equicorrelated,
    Independent,
    MixtureSpec,
    Power,
    PowerMixture,
    Tabulated,
    TruncatedPower,
    parse_dependence,
    parse_model,
    sample_mixture,
    sample_nulls,
)
from .errors import ConfigurationError, PreconditionError, UnsupportedOperation
from .gof import bh_via_gof
from .kernels import BACKEND
from .procedures import PValueBatch, bh_count, bh_count_strict, bhs, gamma_hat, proportions, shifted_count
from .theory import average_power_limit, bhs_bounds, kappa, rho

__version__ = "0.1.0"

"""Multi-fidelity Hamiltonian Monte Carlo.

A low-fidelity surrogate drives the Hamiltonian proposal; a single
high-fidelity density evaluation per surviving proposal corrects it.
"""

from .diagnostics import DiagnosticsReport, effective_sample_size, summarize
from .forward_models import (
    HeatOperatorSpec,
    WishartSpec,
    build_heat_operator,
    build_lf_covariance,
    conjugate_posterior,
    sample_wishart_precision,
    truncated_svd,
)
from .sampler import ChainRecord, IntegrationError, KernelConfig, hmc_step, mfhmc_step, run_chain
from .targets import DualFidelityTarget, LinearGaussianPosterior, MvnTarget

__version__ = "0.1.0"

__all__ = [
    "ChainRecord",
    "DiagnosticsReport",
    "DualFidelityTarget",
    "HeatOperatorSpec",
    "IntegrationError",
    "KernelConfig",
    "LinearGaussianPosterior",
    "MvnTarget",
    "WishartSpec",
    "build_heat_operator",
    "build_lf_covariance",
    "conjugate_posterior",
    "effective_sample_size",
    "hmc_step",
    "mfhmc_step",
    "run_chain",
    "sample_wishart_precision",
    "summarize",
    "truncated_svd",
]

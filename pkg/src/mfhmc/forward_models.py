"""Validation-problem builders: Wishart precisions, the gamma-perturbed
low-fidelity covariance family, the backward-Euler heat operator, truncated
SVD surrogates and the conjugate Gaussian posterior."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .targets import load_linear_operator

__all__ = [
    "HeatOperatorSpec",
    "WishartSpec",
    "build_heat_operator",
    "build_lf_covariance",
    "conjugate_posterior",
    "default_initial_condition",
    "dirichlet_laplacian",
    "make_heat_measurement",
    "precision_relative_error",
    "sample_wishart_precision",
    "smooth_bump_field",
    "truncated_svd",
    "tsvd_truncate",
]


@dataclass(frozen=True)
class HeatOperatorSpec:
    grid_n: int = 32
    domain_length: float = 2 * math.pi
    alpha: float = 0.64
    n_time_steps: int = 100
    final_time: float = 1.0

    def __post_init__(self):
        if self.grid_n < 2:
            raise ValueError(f"grid_n must be >= 2, got {self.grid_n}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.n_time_steps < 1:
            raise ValueError(f"n_time_steps must be >= 1, got {self.n_time_steps}")
        if not (self.domain_length > 0 and self.final_time > 0):
            raise ValueError("domain_length and final_time must be positive")

    @property
    def spacing(self) -> float:
        # unknowns sit strictly inside the domain; the Dirichlet ring is implicit
        return self.domain_length / (self.grid_n + 1)

    @property
    def time_step(self) -> float:
        return self.final_time / self.n_time_steps

    @property
    def dim(self) -> int:
        return self.grid_n**2


def dirichlet_laplacian(n: int, h: float) -> sp.csc_matrix:
    """Five-point Laplacian on an ``n x n`` interior grid, zero boundary values."""
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    d1 = sp.diags([off, main, off], [-1, 0, 1])
    eye = sp.identity(n)
    return ((sp.kron(eye, d1) + sp.kron(d1, eye)) / h**2).tocsc()


def build_heat_operator(spec: HeatOperatorSpec = HeatOperatorSpec()) -> np.ndarray:
    """Dense map from initial to final nodal temperatures, ``F = M^{-n_t}``
    with ``M = I - dt alpha Lap`` (backward Euler)."""
    lap = dirichlet_laplacian(spec.grid_n, spec.spacing)
    M = (sp.identity(spec.dim) - spec.time_step * spec.alpha * lap).tocsc()
    try:
        lu = spla.splu(M)
    except RuntimeError as err:
        raise np.linalg.LinAlgError(f"backward-Euler matrix factorization failed: {err}") from err
    F = np.eye(spec.dim)
    for _ in range(spec.n_time_steps):
        F = lu.solve(F)
    return F


def truncated_svd(F, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=float)
    if not 1 <= k <= min(F.shape):
        raise ValueError(f"k must lie in [1, {min(F.shape)}], got {k}")
    u, s, vt = np.linalg.svd(F, full_matrices=False)
    return u[:, :k], s[:k], vt[:k]


def tsvd_truncate(F, k: int) -> np.ndarray:
    """Rank-``k`` truncated SVD reconstruction of ``F``."""
    u, s, vt = truncated_svd(F, k)
    return (u * s) @ vt


@dataclass(frozen=True)
class WishartSpec:
    dim: int = 250
    dof: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.dof < self.dim:
            raise ValueError(f"dof ({self.dof}) must be >= dim ({self.dim})")


def sample_wishart_precision(spec: WishartSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Identity-scale Wishart draw via the Bartlett decomposition ``B B^T``."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    d = spec.dim
    B = np.zeros((d, d))
    B[np.diag_indices(d)] = np.sqrt(rng.chisquare(spec.dof - np.arange(d)))
    rows, cols = np.tril_indices(d, -1)
    B[rows, cols] = rng.standard_normal(len(rows))
    A = B @ B.T
    return 0.5 * (A + A.T)


def build_lf_covariance(sigma_hf, gamma: float) -> np.ndarray:
    """``Sigma_HF + (gamma / d) trace(Sigma_HF) I``."""
    S = np.asarray(sigma_hf, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"covariance must be square, got shape {S.shape}")
    if np.max(np.abs(S - S.T)) > 1e-10 * max(1.0, float(np.max(np.abs(S)))):
        raise ValueError("covariance matrix is not symmetric")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    d = S.shape[0]
    return S + (gamma / d) * np.trace(S) * np.eye(d)


def precision_relative_error(precision_lf, precision_hf) -> float:
    """Frobenius-norm relative error of the LF precision, in percent."""
    return 100.0 * np.linalg.norm(precision_lf - precision_hf) / np.linalg.norm(precision_hf)


def conjugate_posterior(F, y, sigma_noise: float, sigma_prior: float):
    """Closed-form Gaussian posterior ``(mean, covariance)`` of the linear model."""
    if not (sigma_noise > 0 and sigma_prior > 0):
        raise ValueError("sigmas must be positive")
    F = np.atleast_2d(np.asarray(F, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if F.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: F {F.shape}, y {y.shape}")
    H = F.T @ F / sigma_noise**2 + np.eye(F.shape[1]) / sigma_prior**2
    try:
        factor = scipy.linalg.cho_factor(H, lower=True)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(f"posterior precision factorization failed: {err}") from err
    cov = scipy.linalg.cho_solve(factor, np.eye(F.shape[1]))
    mean = scipy.linalg.cho_solve(factor, F.T @ y / sigma_noise**2)
    return mean, 0.5 * (cov + cov.T)


def make_heat_measurement(F, x_true, noise_sigma: float = 0.1, seed: int = 0) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    x_true = np.asarray(x_true, dtype=float).ravel()
    clean = F @ x_true
    if noise_sigma == 0:
        return clean
    rng = np.random.default_rng(seed)
    return clean + noise_sigma * rng.standard_normal(clean.shape[0])


def smooth_bump_field(grid_n: int = 32, domain_length: float = 2 * math.pi) -> np.ndarray:
    """Stand-in initial temperature: two smooth Gaussian bumps on the interior
    grid, returned as a ``grid_n x grid_n`` array."""
    h = domain_length / (grid_n + 1)
    c = h * np.arange(1, grid_n + 1)
    X, Y = np.meshgrid(c, c, indexing="ij")
    L = domain_length
    hot = 0.5 * np.exp(-((X - 0.35 * L) ** 2 + (Y - 0.6 * L) ** 2) / (2 * (0.12 * L) ** 2))
    warm = 0.3 * np.exp(-((X - 0.68 * L) ** 2 + (Y - 0.3 * L) ** 2) / (2 * (0.09 * L) ** 2))
    return hot + warm


def default_initial_condition() -> np.ndarray:
    """Shipped 32 x 32 stand-in field (not the published one), flattened row-major."""
    ref = resources.files("mfhmc") / "data" / "heat_x_true_32x32.csv"
    with resources.as_file(ref) as path:
        return load_linear_operator(path).ravel()

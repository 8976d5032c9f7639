"""Log-posterior targets.

Every density here is unnormalized: values are correct up to an additive
constant and the samplers only ever use differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "DualFidelityTarget",
    "LinearGaussianPosterior",
    "MatrixFormatError",
    "MvnTarget",
    "linear_gaussian_log_density_and_grad",
    "load_linear_operator",
    "mvn_log_density_and_grad",
    "save_linear_operator",
]


def _check_sigma(name: str, value: float):
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive, got {value}")


def mvn_log_density_and_grad(x, precision) -> tuple[float, np.ndarray]:
    """``(-x^T A x / 2, -A x)`` for a zero-mean Gaussian with precision ``A``."""
    x = np.asarray(x, dtype=float)
    A = np.asarray(precision, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: x {x.shape}, precision {A.shape}")
    Ax = A @ x
    return -0.5 * float(x @ Ax), -Ax


class MvnTarget:
    """Zero-mean multivariate normal given by its precision matrix."""

    def __init__(self, precision):
        A = np.array(precision, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"precision must be square, got shape {A.shape}")
        scale = max(1.0, float(np.max(np.abs(A))))
        if np.max(np.abs(A - A.T)) > 1e-12 * scale:
            raise ValueError("precision matrix is not symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError as err:
            raise ValueError("precision matrix is not positive definite") from err
        A.setflags(write=False)
        self.precision = A
        self.dim = A.shape[0]

    def log_density(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return -0.5 * float(x @ (self.precision @ x))

    def gradient(self, x) -> np.ndarray:
        return -(self.precision @ np.asarray(x, dtype=float))

    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.precision)


def linear_gaussian_log_density_and_grad(
    x, forward, data, sigma_noise: float, sigma_prior: float
) -> tuple[float, np.ndarray]:
    """Log-posterior of ``y = F x + noise`` with isotropic Gaussian noise and prior.

    Value ``-|y - F x|^2 / (2 sn^2) - |x|^2 / (2 sp^2)``, gradient
    ``F^T (y - F x) / sn^2 - x / sp^2``.
    """
    _check_sigma("sigma_noise", sigma_noise)
    _check_sigma("sigma_prior", sigma_prior)
    x = np.asarray(x, dtype=float)
    F = np.atleast_2d(np.asarray(forward, dtype=float))
    y = np.atleast_1d(np.asarray(data, dtype=float))
    if F.shape != (y.shape[0], x.shape[0]):
        raise ValueError(f"shape mismatch: F {F.shape}, y {y.shape}, x {x.shape}")
    r = y - F @ x
    value = -float(r @ r) / (2 * sigma_noise**2) - float(x @ x) / (2 * sigma_prior**2)
    grad = F.T @ r / sigma_noise**2 - x / sigma_prior**2
    return value, grad


class LinearGaussianPosterior:
    """Posterior of a linear forward model under Gaussian noise and prior.

    The residual norm is expanded as ``y.y - 2 x.F^T y + x.F^T F x`` so each
    evaluation costs one Gram-matrix product. :meth:`low_rank` builds the
    same target from truncated SVD factors without forming ``F``.
    """

    def __init__(self, forward, data, sigma_noise: float, sigma_prior: float):
        F = np.atleast_2d(np.asarray(forward, dtype=float))
        y = np.atleast_1d(np.asarray(data, dtype=float))
        if F.shape[0] != y.shape[0]:
            raise ValueError(f"shape mismatch: F {F.shape}, y {y.shape}")
        gram = F.T @ F
        self._setup(gram.__matmul__, F.T @ y, y, F.shape[1], sigma_noise, sigma_prior)
        n = F.shape[1]
        self._mode = lambda: np.linalg.solve(
            gram / sigma_noise**2 + np.eye(n) / sigma_prior**2, self._fty / sigma_noise**2
        )

    @classmethod
    def low_rank(cls, u, s, vt, data, sigma_noise: float, sigma_prior: float):
        """Target for ``F_k = u diag(s) vt`` (``u``: m x k, ``vt``: k x n)."""
        u, s, vt = (np.asarray(a, dtype=float) for a in (u, s, vt))
        y = np.atleast_1d(np.asarray(data, dtype=float))
        if u.shape[0] != y.shape[0] or u.shape[1] != s.shape[0] or vt.shape[0] != s.shape[0]:
            raise ValueError(f"inconsistent factors: u {u.shape}, s {s.shape}, vt {vt.shape}")
        s2 = s**2
        self = cls.__new__(cls)
        self._setup(lambda x: vt.T @ (s2 * (vt @ x)), vt.T @ (s * (u.T @ y)), y, vt.shape[1],
                    sigma_noise, sigma_prior)
        # the posterior mode lies in the row space of vt; the prior pins the rest at zero
        coef = (s * (u.T @ y)) / sigma_noise**2 / (s2 / sigma_noise**2 + 1 / sigma_prior**2)
        self._mode = lambda: vt.T @ coef
        return self

    def _setup(self, gram_apply, fty, y, dim, sigma_noise, sigma_prior):
        _check_sigma("sigma_noise", sigma_noise)
        _check_sigma("sigma_prior", sigma_prior)
        self._gram = gram_apply
        self._fty = fty
        self._yty = float(y @ y)
        self._inv_sn2 = 1.0 / sigma_noise**2
        self._inv_sp2 = 1.0 / sigma_prior**2
        self.sigma_noise = sigma_noise
        self.sigma_prior = sigma_prior
        self.dim = dim

    def mode(self) -> np.ndarray:
        """Posterior mode (equal to the posterior mean)."""
        return self._mode()

    def log_density(self, x) -> float:
        x = np.asarray(x, dtype=float)
        resid2 = self._yty - 2.0 * float(x @ self._fty) + float(x @ self._gram(x))
        return -0.5 * resid2 * self._inv_sn2 - 0.5 * float(x @ x) * self._inv_sp2

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self._fty - self._gram(x)) * self._inv_sn2 - x * self._inv_sp2


@dataclass(frozen=True)
class DualFidelityTarget:
    """High-fidelity log-density (value only) paired with a differentiable
    low-fidelity log-density."""

    hf_log_density: Callable[[np.ndarray], float]
    lf_log_density: Callable[[np.ndarray], float]
    lf_gradient: Callable[[np.ndarray], np.ndarray]
    dim: int

    @classmethod
    def from_targets(cls, hf, lf) -> "DualFidelityTarget":
        """Pair two target objects; only ``hf.log_density`` is ever used."""
        if hf.dim != lf.dim:
            raise ValueError(f"HF dim {hf.dim} != LF dim {lf.dim}")
        return cls(hf.log_density, lf.log_density, lf.gradient, lf.dim)


class MatrixFormatError(ValueError):
    pass


def load_linear_operator(path) -> np.ndarray:
    """Read a dense matrix: a ``rows,cols`` header then one CSV line per row."""
    path = Path(path)
    with path.open() as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MatrixFormatError(f"{path}: empty file")
    try:
        rows, cols = (int(v) for v in lines[0].split(","))
    except ValueError as err:
        raise MatrixFormatError(f"{path}: header must be 'rows,cols', got {lines[0]!r}") from err
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"{path}: non-positive shape {rows}x{cols}")
    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"{path}: header declares {rows} rows, found {len(body)}")
    out = np.empty((rows, cols))
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise MatrixFormatError(f"{path}: row {i} has {len(fields)} entries, expected {cols}")
        try:
            out[i] = [float(v) for v in fields]
        except ValueError as err:
            raise MatrixFormatError(f"{path}: row {i}: {err}") from err
    return out


def save_linear_operator(path, matrix) -> None:
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    with Path(path).open("w") as fh:
        fh.write(f"{A.shape[0]},{A.shape[1]}\n")
        for row in A:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")

"""Efficiency and accuracy metrics, normalized by high-fidelity cost.

Conventions:

* burn-in: the start state is never a sample; of the ``m`` iterations the
  first ``floor(burn_in_frac * m)`` are dropped.
* autocovariances use the biased ``1/M`` normalization.
* the ESS lag sum stops before the first lag whose autocorrelation falls
  below 0.05; ESS is the minimum over coordinates.
* ``n_hf`` counts all HF work including burn-in. For HMC that is ``2 L`` per
  iteration (forward and adjoint solve per gradient); the density-only count
  is reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .sampler import ChainRecord

__all__ = [
    "DiagnosticsReport",
    "DegenerateSeriesError",
    "accepted_moves_per_hf",
    "autocorrelation",
    "autocorrelation_function",
    "coverage95",
    "effective_sample_size",
    "esjd_per_hf",
    "ess_per_hf",
    "post_burn_in",
    "relative_error_pct",
    "summarize",
]

ESS_CUTOFF = 0.05


class DegenerateSeriesError(ValueError):
    pass


def post_burn_in(chain, burn_in_frac: float = 0.0) -> np.ndarray:
    """Post-burn-in samples as an ``(M, D)`` array.

    A :class:`ChainRecord` contributes its iterations (start state excluded);
    a plain array is taken as the iterations themselves.
    """
    if not 0.0 <= burn_in_frac < 1.0:
        raise ValueError(f"burn_in_frac must lie in [0, 1), got {burn_in_frac}")
    if isinstance(chain, ChainRecord):
        draws = chain.samples[1:]
    else:
        draws = np.asarray(chain, dtype=float)
        if draws.ndim == 1:
            draws = draws[:, None]
    n_burn = int(math.floor(burn_in_frac * len(draws) + 1e-9))
    return draws[n_burn:]


def autocorrelation(series, lag: int) -> float:
    x = np.asarray(series, dtype=float)
    M = x.shape[0]
    if M < 2:
        raise ValueError("series needs at least two points")
    if not 0 <= lag < M:
        raise ValueError(f"lag must lie in [0, {M - 1}], got {lag}")
    c = x - x.mean()
    var = float(c @ c) / M
    if var == 0:
        raise DegenerateSeriesError("series has zero variance")
    return float(c[: M - lag] @ c[lag:]) / M / var


def autocorrelation_function(series) -> np.ndarray:
    """All lags ``0..M-1`` at once via FFT (same estimator as :func:`autocorrelation`)."""
    x = np.asarray(series, dtype=float)
    M = x.shape[0]
    c = x - x.mean()
    nfft = 1 << (2 * M - 1).bit_length()
    f = np.fft.rfft(c, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:M] / M
    if acov[0] <= 0:
        raise DegenerateSeriesError("series has zero variance")
    return acov / acov[0]


def _ess_1d(x: np.ndarray) -> float:
    M = x.shape[0]
    if np.ptp(x) == 0:
        return 0.0
    rho = autocorrelation_function(x)
    below = np.flatnonzero(rho[1:] < ESS_CUTOFF)
    S = below[0] + 1 if len(below) else M  # sum runs over lags 1..S-1
    s = np.arange(1, S)
    tau = 1.0 + 2.0 * float(np.sum((1.0 - s / M) * rho[1:S]))
    return M / tau


def effective_sample_size(samples) -> np.ndarray:
    """Per-coordinate ESS of an ``(M, D)`` sample array (0 for constant coordinates)."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.array([_ess_1d(X[:, d]) for d in range(X.shape[1])])


def ess_per_hf(chain, burn_in_frac: float, n_hf_total: float) -> float:
    X = post_burn_in(chain, burn_in_frac)
    if X.shape[0] < 10:
        raise ValueError(f"need at least 10 post-burn-in samples, got {X.shape[0]}")
    if n_hf_total <= 0:
        raise ValueError("n_hf_total must be positive")
    return float(np.min(effective_sample_size(X))) / n_hf_total


def esjd_per_hf(chain, burn_in_frac: float, n_hf_total: float) -> float:
    X = post_burn_in(chain, burn_in_frac)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 post-burn-in samples")
    if n_hf_total <= 0:
        raise ValueError("n_hf_total must be positive")
    jumps = np.diff(X, axis=0)
    return float(np.mean(np.sum(jumps**2, axis=1))) / n_hf_total


def relative_error_pct(v_mcmc, v_true) -> float:
    v_mcmc = np.asarray(v_mcmc, dtype=float)
    v_true = np.asarray(v_true, dtype=float)
    if v_mcmc.shape != v_true.shape:
        raise ValueError(f"shape mismatch: {v_mcmc.shape} vs {v_true.shape}")
    denom = np.linalg.norm(v_true)
    if denom == 0:
        raise ValueError("reference has zero norm")
    return 100.0 * float(np.linalg.norm(v_mcmc - v_true)) / float(denom)


def coverage95(post_mean, post_std, truth) -> float:
    """Fraction of entries with ``|truth - mean| <= 1.96 std``."""
    post_mean, post_std, truth = (np.asarray(a, dtype=float) for a in (post_mean, post_std, truth))
    if not (post_mean.shape == post_std.shape == truth.shape):
        raise ValueError("post_mean, post_std and truth must share a shape")
    if np.any(post_std < 0):
        raise ValueError("post_std must be non-negative")
    return float(np.mean(np.abs(truth - post_mean) <= 1.96 * post_std))


def accepted_moves_per_hf(chain: ChainRecord) -> float:
    """Accepted HF moves divided by HF work (see :meth:`ChainRecord.hf_work`)."""
    work = chain.hf_work
    if work <= 0:
        raise ValueError("chain has no HF evaluations")
    return chain.n_accepted / work


@dataclass(frozen=True)
class DiagnosticsReport:
    accepted_per_hf: float
    ess_per_hf: float
    esjd_per_hf: float
    rel_error_mean_pct: float
    rel_error_cov_pct: float
    coverage95: float
    n_hf_total: int
    n_hf_density: int
    m_post_burnin: int

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(
    chain: ChainRecord,
    burn_in_frac: float,
    true_mean=None,
    true_cov=None,
    truth=None,
) -> DiagnosticsReport:
    """Full report for one chain.

    ``truth`` is the field scored by the coverage metric; it defaults to
    ``true_mean``. Relative errors without a reference (or with a zero-norm
    reference) are reported as NaN.
    """
    X = post_burn_in(chain, burn_in_frac)
    n_hf = chain.hf_work
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])

    def _rel(est, ref):
        if ref is None or np.linalg.norm(ref) == 0:
            return math.nan
        return relative_error_pct(est, ref)

    rel_mean = _rel(mean, true_mean)
    rel_cov = math.nan
    if true_cov is not None and X.shape[0] > 1:
        rel_cov = _rel(np.atleast_2d(np.cov(X, rowvar=False)), np.atleast_2d(true_cov))
    ref_field = truth if truth is not None else true_mean
    cov95 = coverage95(mean, std, ref_field) if ref_field is not None else math.nan
    return DiagnosticsReport(
        accepted_per_hf=accepted_moves_per_hf(chain),
        ess_per_hf=ess_per_hf(X, 0.0, n_hf) if X.shape[0] >= 10 else math.nan,
        esjd_per_hf=esjd_per_hf(X, 0.0, n_hf) if X.shape[0] >= 2 else math.nan,
        rel_error_mean_pct=rel_mean,
        rel_error_cov_pct=rel_cov,
        coverage95=cov95,
        n_hf_total=int(n_hf),
        n_hf_density=chain.hf_density_evals,
        m_post_burnin=int(X.shape[0]),
    )

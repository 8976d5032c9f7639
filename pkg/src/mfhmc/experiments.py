"""Seeded reproductions of the two analytic studies.

* MVN sweep: ill-conditioned Wishart-precision Gaussian, LF models from the
  gamma-inflated covariance family, HMC vs MFHMC under HF-evaluation budgets.
* Heat table: initial-condition inversion with the backward-Euler operator,
  conjugate Gaussian prior/noise and truncated-SVD surrogates.

Each cell (algorithm, fidelity, trajectory, seed) owns an RNG stream derived
from ``(seed0, cell_index)``. A budgeted run is deterministic, so the run
capped at a smaller budget is exactly a prefix of the run capped at the
largest one; every budget is therefore scored from one chain per cell.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import summarize
from .forward_models import (
    HeatOperatorSpec,
    WishartSpec,
    build_heat_operator,
    build_lf_covariance,
    conjugate_posterior,
    default_initial_condition,
    make_heat_measurement,
    precision_relative_error,
    sample_wishart_precision,
)
from .sampler import KernelConfig, run_chain
from .targets import DualFidelityTarget, LinearGaussianPosterior, MvnTarget

__all__ = [
    "CELL_COLUMNS",
    "HEAT_TABLE_COLUMNS",
    "CellResult",
    "HeatTableResult",
    "MvnSweepResult",
    "SweepSpec",
    "average_cells",
    "cell_seed",
    "prior_draw_start",
    "run_heat_experiment",
    "run_mvn_experiment",
]

CELL_COLUMNS = (
    "algorithm", "gamma_or_modes", "epsilon", "L", "budget", "seed",
    "accepted_per_hf", "ess_per_hf", "esjd_per_hf", "rel_err_pct", "coverage95", "n_hf",
)
HEAT_TABLE_COLUMNS = (
    "model", "modes", "seed", "lf_acceptance", "hf_acceptance", "n_hf",
    "rejected_hf", "error_mean_pct", "coverage95",
)
_METRICS = ("accepted_per_hf", "ess_per_hf", "esjd_per_hf", "rel_err_pct", "coverage95", "n_hf")


def cell_seed(seed0: int, cell_index: int) -> int:
    """64-bit chain seed for one experiment cell."""
    ss = np.random.SeedSequence([int(seed0), int(cell_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SweepSpec:
    budgets: tuple[int, ...] = (10_000, 20_000, 30_000, 40_000, 50_000)
    trajectories: tuple[tuple[float, int], ...] = ((0.05, 5), (0.05, 20), (0.1, 20), (0.1, 50))
    gammas: tuple[float, ...] = (1e-4, 1e-5, 1e-6, 1e-7)
    n_seeds: int = 5
    burn_in_frac: float = 0.25
    include_hmc: bool = True
    max_iterations: int = 10_000_000

    def __post_init__(self):
        b = list(self.budgets)
        if not b or any(v <= 0 for v in b) or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError(f"budgets must be positive and strictly increasing, got {b}")
        if self.n_seeds < 1:
            raise ValueError(f"n_seeds must be >= 1, got {self.n_seeds}")
        if not self.trajectories:
            raise ValueError("trajectory grid is empty")
        for eps, L in self.trajectories:
            if eps <= 0 or L < 1:
                raise ValueError(f"invalid trajectory (epsilon={eps}, L={L})")
        if any(g < 0 for g in self.gammas):
            raise ValueError("gammas must be non-negative")

    def longest_trajectory(self) -> tuple[float, int]:
        return max(self.trajectories, key=lambda t: t[0] * t[1])


@dataclass(frozen=True)
class CellResult:
    algorithm: str
    gamma_or_modes: float | int | None
    epsilon: float
    L: int
    budget: int | None
    seed: int
    accepted_per_hf: float
    ess_per_hf: float
    esjd_per_hf: float
    rel_err_pct: float
    coverage95: float
    n_hf: int
    stage1_rate: float
    stage2_rate: float
    n_iterations: int

    def row(self) -> dict:
        return {c: getattr(self, c) for c in CELL_COLUMNS}


def _group_key(c: CellResult):
    return (c.algorithm, c.gamma_or_modes, c.epsilon, c.L, c.budget)


def average_cells(cells) -> list[dict]:
    """Seed-averaged rows (``seed`` column set to ``"mean"``), first-seen order."""
    groups: dict = defaultdict(list)
    for c in cells:
        groups[_group_key(c)].append(c)
    rows = []
    for (alg, gm, eps, L, budget), members in groups.items():
        row = {"algorithm": alg, "gamma_or_modes": gm, "epsilon": eps, "L": L,
               "budget": budget, "seed": "mean"}
        for name in _METRICS + ("stage1_rate", "stage2_rate"):
            row[name] = float(np.mean([getattr(m, name) for m in members]))
        row["n_seeds"] = len(members)
        rows.append(row)
    return rows


def _stage_rates(chain) -> tuple[float, float]:
    n1 = int(np.count_nonzero(chain.stage1_accepted))
    s1 = n1 / chain.n_iterations if chain.n_iterations else math.nan
    if chain.kernel == "hmc":
        return s1, s1
    s2 = chain.n_accepted / n1 if n1 else math.nan
    return s1, s2


def _cell(alg, fid, eps, L, budget, seed_idx, chain, report, rel_err) -> CellResult:
    s1, s2 = _stage_rates(chain)
    return CellResult(
        algorithm=alg, gamma_or_modes=fid, epsilon=eps, L=L, budget=budget, seed=seed_idx,
        accepted_per_hf=report.accepted_per_hf, ess_per_hf=report.ess_per_hf,
        esjd_per_hf=report.esjd_per_hf, rel_err_pct=rel_err, coverage95=report.coverage95,
        n_hf=report.n_hf_total, stage1_rate=s1, stage2_rate=s2, n_iterations=chain.n_iterations,
    )


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# --- MVN sweep -------------------------------------------------------------


@dataclass
class MvnSweepResult:
    per_seed: list[CellResult]
    averaged: list[dict]
    precision_hf: np.ndarray
    lf_precision_error_pct: dict[float, float] = field(default_factory=dict)


def _lf_precision(sigma_hf, gamma):
    A = np.linalg.inv(build_lf_covariance(sigma_hf, gamma))
    return 0.5 * (A + A.T)


def _mvn_job(job) -> list[CellResult]:
    alg, gamma, eps, L, seed_idx, seed, A, sigma_hf, spec = job
    hf = MvnTarget(A)
    if alg == "hmc":
        target = hf
    else:
        target = DualFidelityTarget.from_targets(hf, MvnTarget(_lf_precision(sigma_hf, gamma)))
    config = KernelConfig(eps, L, spec.max_iterations, spec.burn_in_frac, seed)
    dim = A.shape[0]
    chain = run_chain(alg, np.zeros(dim), target, config, max_hf_work=max(spec.budgets))
    out = []
    for budget in spec.budgets:
        sub = chain.truncate_to_budget(budget)
        report = summarize(sub, spec.burn_in_frac, true_mean=np.zeros(dim), true_cov=sigma_hf)
        out.append(_cell(alg, gamma, eps, L, budget, seed_idx, sub, report, report.rel_error_cov_pct))
    return out


def run_mvn_experiment(
    spec: SweepSpec = SweepSpec(),
    dim: int = 50,
    dof: int = 50,
    seed0: int = 0,
    workers: int = 1,
) -> MvnSweepResult:
    """HMC vs MFHMC on a Wishart-precision Gaussian across budgets and fidelities.

    Covariance error is measured against ``Sigma_HF = A_HF^{-1}``; coverage
    scores the analytic mean (zero). HMC cells carry ``gamma_or_modes=None``.
    """
    A = sample_wishart_precision(WishartSpec(dim, dof, seed0))
    sigma_hf = np.linalg.inv(A)
    sigma_hf = 0.5 * (sigma_hf + sigma_hf.T)

    jobs = []
    algs = ([("hmc", None)] if spec.include_hmc else []) + [("mfhmc", g) for g in spec.gammas]
    for alg, gamma in algs:
        for eps, L in spec.trajectories:
            for s in range(spec.n_seeds):
                seed = cell_seed(seed0, len(jobs))
                jobs.append((alg, gamma, eps, L, s, seed, A, sigma_hf, spec))
    cells = [c for chunk in _map(_mvn_job, jobs, workers) for c in chunk]
    errors = {g: precision_relative_error(_lf_precision(sigma_hf, g), A) for g in spec.gammas}
    return MvnSweepResult(cells, average_cells(cells), A, errors)


# --- heat table --------------------------------------------------------------


@dataclass
class HeatTableResult:
    per_seed: list[dict]
    averaged: list[dict]
    cells: list[CellResult]
    posterior_mean: np.ndarray
    x_true: np.ndarray
    measurement: np.ndarray


def _heat_lf(F, svd, modes, lf_operator, y, sn, sp):
    if lf_operator is not None:
        return LinearGaussianPosterior(lf_operator, y, sn, sp)
    if modes >= min(F.shape):
        # full-rank truncation reproduces F; use it as is so both fidelities agree bit for bit
        return LinearGaussianPosterior(F, y, sn, sp)
    u, s, vt = svd
    if modes < F.shape[1] // 2:
        return LinearGaussianPosterior.low_rank(u[:, :modes], s[:modes], vt[:modes], y, sn, sp)
    Fk = (u[:, :modes] * s[:modes]) @ vt[:modes]
    return LinearGaussianPosterior(Fk, y, sn, sp)


def prior_draw_start(dim: int, sigma_prior: float, chain_seed: int) -> np.ndarray:
    """Start state drawn from the isotropic prior, from a stream separate from the chain's.

    Starting at a mode (the prior mean or the posterior mean) stalls HMC in
    high dimension: leapfrog conserves a shadow energy whose potential term is
    scaled by ``1 - (eps omega)^2 / 4``, so a trajectory leaving a mode gains
    energy error in every weakly informed direction at once and the proposals
    are rejected for thousands of iterations.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(chain_seed), 1]))
    return sigma_prior * rng.standard_normal(dim)


def _heat_job(job):
    (alg, model, modes, seed_idx, seed, F, svd, lf_operator, y, sn, sp,
     config, post_mean, x_true) = job
    hf = LinearGaussianPosterior(F, y, sn, sp)
    if alg == "hmc":
        target = hf
    else:
        lf = _heat_lf(F, svd, modes, lf_operator, y, sn, sp)
        target = DualFidelityTarget.from_targets(hf, lf)
    cfg = KernelConfig(config.epsilon, config.n_leapfrog, config.n_steps, config.burn_in_frac, seed)
    chain = run_chain(alg, prior_draw_start(F.shape[1], sp, seed), target, cfg)
    report = summarize(chain, cfg.burn_in_frac, true_mean=post_mean, truth=x_true)
    cell = _cell(alg, modes, cfg.epsilon, cfg.n_leapfrog, None, seed_idx, chain, report,
                 report.rel_error_mean_pct)
    n_iter = chain.n_iterations
    n1 = int(np.count_nonzero(chain.stage1_accepted))
    if alg == "hmc":
        work_per_iter = 2 * cfg.n_leapfrog
        row = dict(lf_acceptance=math.nan, hf_acceptance=chain.n_accepted / n_iter,
                   n_hf=chain.hf_work, rejected_hf=work_per_iter * (n_iter - chain.n_accepted))
    else:
        row = dict(lf_acceptance=n1 / n_iter,
                   hf_acceptance=chain.n_accepted / n1 if n1 else math.nan,
                   n_hf=chain.hf_density_evals, rejected_hf=n1 - chain.n_accepted)
    row.update(model=model, modes=modes, seed=seed_idx,
               error_mean_pct=report.rel_error_mean_pct, coverage95=report.coverage95)
    return {c: row[c] for c in HEAT_TABLE_COLUMNS}, cell


def run_heat_experiment(
    modes_list=(25, 50, 75, 100, 200),
    config: KernelConfig = KernelConfig(0.04, 10, 20_000),
    seed0: int = 0,
    n_seeds: int = 5,
    spec: HeatOperatorSpec = HeatOperatorSpec(),
    x_true=None,
    sigma_prior: float = 0.1,
    noise_sigma: float = 0.1,
    include_hmc: bool = True,
    lf_operators: dict | None = None,
    workers: int = 1,
    forward=None,
) -> HeatTableResult:
    """Single-stage HMC on the HF posterior and MFHMC with one TSVD surrogate per
    entry of ``modes_list``; extra LF operators (name -> matrix) may be added.

    Prior and noise are both isotropic Gaussians; the measurement uses
    ``seed0``. Chains start from a prior draw (see :func:`prior_draw_start`).
    ``forward`` may pass a prebuilt operator for ``spec``.
    """
    F = build_heat_operator(spec) if forward is None else np.asarray(forward, dtype=float)
    D = F.shape[1]
    for k in modes_list:
        if not 1 <= k <= min(F.shape):
            raise ValueError(f"modes must lie in [1, {min(F.shape)}], got {k}")
    x_true = default_initial_condition() if x_true is None else np.asarray(x_true, float).ravel()
    if x_true.shape[0] != D:
        raise ValueError(f"x_true has {x_true.shape[0]} entries, operator expects {D}")
    y = make_heat_measurement(F, x_true, noise_sigma, seed0)
    post_mean, _ = conjugate_posterior(F, y, noise_sigma, sigma_prior)
    svd = np.linalg.svd(F) if modes_list else None

    models = ([("hmc", "1 stage HMC", D, None)] if include_hmc else [])
    models += [("mfhmc", f"Model {i + 1}", k, None) for i, k in enumerate(modes_list)]
    for name, op in (lf_operators or {}).items():
        op = np.asarray(op, dtype=float)
        if op.shape != F.shape:
            raise ValueError(f"LF operator {name!r} has shape {op.shape}, expected {F.shape}")
        models.append(("mfhmc", str(name), None, op))

    jobs = []
    for alg, model, modes, op in models:
        for s in range(n_seeds):
            seed = cell_seed(seed0, len(jobs))
            jobs.append((alg, model, modes, s, seed, F, svd, op, y, noise_sigma, sigma_prior,
                         config, post_mean, x_true))
    results = _map(_heat_job, jobs, workers)
    per_seed = [r for r, _ in results]
    cells = [c for _, c in results]

    averaged = []
    seen: dict = defaultdict(list)
    for r in per_seed:
        seen[r["model"]].append(r)
    for model, rows in seen.items():
        avg = {"model": model, "modes": rows[0]["modes"], "seed": "mean"}
        for col in HEAT_TABLE_COLUMNS[3:]:
            avg[col] = float(np.mean([r[col] for r in rows]))
        averaged.append(avg)
    return HeatTableResult(per_seed, averaged, cells, post_mean, x_true, y)

"""Command-line entry point.

    mfhmc sample      one chain on the MVN or heat problem -> chain.csv, report.csv
    mfhmc mvn-sweep   HMC vs MFHMC budget sweep -> mvn_cells.csv, mvn_summary.csv
    mfhmc heat-table  conjugate heat inversion -> heat_table.csv and friends

Failures exit nonzero with one ``error key=... msg=...`` line on stderr.
"""

from __future__ import annotations

import sys
from itertools import product
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .diagnostics import summarize
from .experiments import (
    CELL_COLUMNS,
    HEAT_TABLE_COLUMNS,
    SweepSpec,
    prior_draw_start,
    run_heat_experiment,
    run_mvn_experiment,
)
from .forward_models import (
    HeatOperatorSpec,
    WishartSpec,
    build_heat_operator,
    build_lf_covariance,
    conjugate_posterior,
    default_initial_condition,
    make_heat_measurement,
    sample_wishart_precision,
    truncated_svd,
)
from .io import fmt, write_chain, write_report, write_rows
from .sampler import KernelConfig, run_chain
from .targets import DualFidelityTarget, LinearGaussianPosterior, MvnTarget, load_linear_operator


def _load_x_true(cfg: RunConfig) -> np.ndarray:
    if cfg.x_true is None:
        return default_initial_condition()
    return load_linear_operator(cfg.x_true).ravel()


def _sample_problem(cfg: RunConfig):
    """Return ``(target, true_mean, true_cov, truth, start)`` for the ``sample`` command.

    MVN chains start at zero; heat chains from a prior draw.
    """
    if cfg.problem == "mvn":
        A = sample_wishart_precision(WishartSpec(cfg.dim, cfg.dof, cfg.seed))
        hf = MvnTarget(A)
        sigma = hf.covariance()
        sigma = 0.5 * (sigma + sigma.T)
        if cfg.algorithm == "hmc":
            return hf, np.zeros(cfg.dim), sigma, None, np.zeros(cfg.dim)
        A_lf = np.linalg.inv(build_lf_covariance(sigma, cfg.gamma))
        lf = MvnTarget(0.5 * (A_lf + A_lf.T))
        return DualFidelityTarget.from_targets(hf, lf), np.zeros(cfg.dim), sigma, None, np.zeros(cfg.dim)

    F = build_heat_operator(HeatOperatorSpec())
    x_true = _load_x_true(cfg)
    y = make_heat_measurement(F, x_true, cfg.noise_sigma, cfg.seed)
    mean, cov = conjugate_posterior(F, y, cfg.noise_sigma, cfg.sigma_prior)
    hf = LinearGaussianPosterior(F, y, cfg.noise_sigma, cfg.sigma_prior)
    if cfg.algorithm == "hmc":
        return hf, mean, cov, x_true, prior_draw_start(F.shape[1], cfg.sigma_prior, cfg.seed)
    if cfg.lf_operator is not None:
        lf = LinearGaussianPosterior(load_linear_operator(cfg.lf_operator), y,
                                     cfg.noise_sigma, cfg.sigma_prior)
    else:
        u, s, vt = truncated_svd(F, cfg.modes)
        lf = LinearGaussianPosterior.low_rank(u, s, vt, y, cfg.noise_sigma, cfg.sigma_prior)
    return (DualFidelityTarget.from_targets(hf, lf), mean, cov, x_true,
            prior_draw_start(F.shape[1], cfg.sigma_prior, cfg.seed))


def cmd_sample(cfg: RunConfig, out: Path) -> None:
    eps, L, m = cfg.kernel_settings()
    target, mean, cov, truth, start = _sample_problem(cfg)
    config = KernelConfig(eps, L, m, cfg.burn_in_frac, cfg.seed)
    chain = run_chain(cfg.algorithm, start, target, config, max_hf_work=cfg.budget)
    report = summarize(chain, cfg.burn_in_frac, true_mean=mean, true_cov=cov, truth=truth)
    write_chain(chain, out / "chain.csv", thin=cfg.thin)
    write_report(report, out / "report.csv")
    for name, value in report.as_dict().items():
        print(f"{name:>20s}  {fmt(value)}")


def cmd_mvn_sweep(cfg: RunConfig, out: Path) -> None:
    spec = SweepSpec(
        budgets=cfg.budgets,
        trajectories=tuple(product(cfg.epsilons, cfg.leapfrogs)),
        gammas=cfg.gammas,
        n_seeds=cfg.n_seeds,
        burn_in_frac=cfg.burn_in_frac,
    )
    result = run_mvn_experiment(spec, cfg.dim, cfg.dof, cfg.seed, workers=cfg.workers)
    write_rows([c.row() for c in result.per_seed], CELL_COLUMNS, out / "mvn_cells.csv")
    write_rows(result.averaged, CELL_COLUMNS, out / "mvn_summary.csv")
    for gamma, err in result.lf_precision_error_pct.items():
        print(f"gamma={gamma:g}  LF precision error {err:.3g}%")
    for row in result.averaged:
        if row["budget"] == max(cfg.budgets):
            print(f"{row['algorithm']:>5s} gamma={fmt(row['gamma_or_modes']) or '-':>6s} "
                  f"eps={row['epsilon']:g} L={row['L']:<3d} acc/nhf={row['accepted_per_hf']:.4g} "
                  f"ess/nhf={row['ess_per_hf']:.4g} cov_err={row['rel_err_pct']:.3g}%")


def cmd_heat_table(cfg: RunConfig, out: Path) -> None:
    eps, L, m = cfg.kernel_settings()
    config = KernelConfig(eps, L, m, cfg.burn_in_frac, cfg.seed)
    lf_ops = {"file": load_linear_operator(cfg.lf_operator)} if cfg.lf_operator else None
    x_true = _load_x_true(cfg) if cfg.x_true else None
    result = run_heat_experiment(
        cfg.modes_list, config, seed0=cfg.seed, n_seeds=cfg.n_seeds, x_true=x_true,
        sigma_prior=cfg.sigma_prior, noise_sigma=cfg.noise_sigma,
        lf_operators=lf_ops, workers=cfg.workers,
    )
    write_rows(result.per_seed, HEAT_TABLE_COLUMNS, out / "heat_table_seeds.csv")
    write_rows(result.averaged, HEAT_TABLE_COLUMNS, out / "heat_table.csv")
    write_rows([c.row() for c in result.cells], CELL_COLUMNS, out / "heat_cells.csv")
    print(f"{'model':>12s} {'modes':>6s} {'acc LF':>7s} {'acc HF':>7s} {'n_hf':>9s} "
          f"{'rej HF':>9s} {'err %':>6s}")
    for r in result.averaged:
        print(f"{r['model']:>12s} {fmt(r['modes']):>6s} {r['lf_acceptance']:7.3f} "
              f"{r['hf_acceptance']:7.3f} {r['n_hf']:9.0f} {r['rejected_hf']:9.0f} "
              f"{r['error_mean_pct']:6.2f}")


COMMANDS = {"sample": cmd_sample, "mvn-sweep": cmd_mvn_sweep, "heat-table": cmd_heat_table}


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as err:
        print(f"error key={err.key} msg={_one_line(err.message)!r}", file=sys.stderr)
        return 2
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[cfg.command](cfg, out)
    except ConfigError as err:
        print(f"error key={err.key} msg={_one_line(err.message)!r}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - surfaced as a single machine-readable line
        print(f"error type={type(err).__name__} msg={_one_line(err)!r}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

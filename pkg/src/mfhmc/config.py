"""Run configuration: flat ``key=value`` files, ``--kebab-case`` flags and the
``MFHMC_SEED`` environment override.

Precedence, lowest to highest: built-in defaults, config file, flags,
``MFHMC_SEED``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

COMMANDS = ("sample", "mvn-sweep", "heat-table")

# problem -> (epsilon, n_leapfrog, n_steps)
PROBLEM_DEFAULTS = {"mvn": (0.1, 50, 5000), "heat": (0.04, 10, 20_000)}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class RunConfig:
    command: str = "sample"
    algorithm: str = "mfhmc"
    problem: str = "mvn"
    epsilon: float | None = None
    n_leapfrog: int | None = None
    n_steps: int | None = None
    burn_in_frac: float = 0.25
    seed: int = 0
    gamma: float = 1e-6
    modes: int = 100
    dim: int = 50
    dof: int = 50
    budget: int | None = None
    budgets: tuple[int, ...] = (10_000, 20_000, 30_000, 40_000, 50_000)
    gammas: tuple[float, ...] = (1e-4, 1e-5, 1e-6, 1e-7)
    modes_list: tuple[int, ...] = (25, 50, 75, 100, 200)
    epsilons: tuple[float, ...] = (0.05, 0.1)
    leapfrogs: tuple[int, ...] = (5, 20, 50)
    n_seeds: int = 5
    sigma_prior: float = 0.1
    noise_sigma: float = 0.1
    thin: int = 1
    workers: int = 1
    output_dir: str = "mfhmc-out"
    lf_operator: str | None = None
    x_true: str | None = None

    def kernel_settings(self) -> tuple[float, int, int]:
        """``(epsilon, n_leapfrog, n_steps)`` with problem defaults filled in."""
        eps, L, m = PROBLEM_DEFAULTS["heat" if self.command == "heat-table" else self.problem]
        return (
            self.epsilon if self.epsilon is not None else eps,
            self.n_leapfrog if self.n_leapfrog is not None else L,
            self.n_steps if self.n_steps is not None else m,
        )


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _list(conv):
    def parse(text: str):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(t) for t in items)
    return parse


def _choice(*options):
    def parse(text: str):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _optional(conv):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none") else conv(text)
    return parse


_PARSERS = {
    "algorithm": _choice("hmc", "mfhmc"),
    "problem": _choice("mvn", "heat"),
    "epsilon": float,
    "n_leapfrog": _int,
    "n_steps": _int,
    "burn_in_frac": float,
    "seed": _int,
    "gamma": float,
    "modes": _int,
    "dim": _int,
    "dof": _int,
    "budget": _optional(_int),
    "budgets": _list(_int),
    "gammas": _list(float),
    "modes_list": _list(_int),
    "epsilons": _list(float),
    "leapfrogs": _list(_int),
    "n_seeds": _int,
    "sigma_prior": float,
    "noise_sigma": float,
    "thin": _int,
    "workers": _int,
    "output_dir": str,
    "lf_operator": _optional(str),
    "x_true": _optional(str),
}


def _convert(key: str, text: str):
    if key not in _PARSERS:
        raise ConfigError(key, "unknown key")
    try:
        return _PARSERS[key](text)
    except (TypeError, ValueError) as err:
        raise ConfigError(key, f"invalid value {text!r}: {err}") from None


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise ConfigError("config", f"cannot read {path}: {err.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"{path}:{lineno}: expected key=value")
        key, text = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = _convert(key, text)
    return values


def _positive(cfg, key, allow_none=False):
    v = getattr(cfg, key)
    if v is None and allow_none:
        return
    if v is None or not v > 0:
        raise ConfigError(key, f"must be positive, got {v}")


def validate(cfg: RunConfig) -> RunConfig:
    for key in ("epsilon", "n_leapfrog", "n_steps", "budget"):
        _positive(cfg, key, allow_none=True)
    for key in ("dim", "dof", "modes", "n_seeds", "thin", "workers", "sigma_prior", "noise_sigma"):
        _positive(cfg, key)
    if not 0.0 <= cfg.burn_in_frac < 1.0:
        raise ConfigError("burn_in_frac", f"must lie in [0, 1), got {cfg.burn_in_frac}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {cfg.seed}")
    if cfg.gamma < 0:
        raise ConfigError("gamma", f"must be non-negative, got {cfg.gamma}")
    if any(g < 0 for g in cfg.gammas):
        raise ConfigError("gammas", "entries must be non-negative")
    if cfg.dof < cfg.dim:
        raise ConfigError("dof", f"must be >= dim ({cfg.dim}), got {cfg.dof}")
    b = cfg.budgets
    if any(v <= 0 for v in b) or any(x >= y for x, y in zip(b, b[1:])):
        raise ConfigError("budgets", "must be positive and strictly increasing")
    for key in ("modes_list", "epsilons", "leapfrogs"):
        if any(v <= 0 for v in getattr(cfg, key)):
            raise ConfigError(key, "entries must be positive")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("args", message)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfhmc", description="Multi-fidelity HMC sampler and experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="key=value config file")
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        parser.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                            metavar=f.name.upper())
    return parser


def _attach_values(argv):
    # "--gamma -1e-3" -> "--gamma=-1e-3"; argparse would read the value as a flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) \
                and not argv[i + 1].startswith("--"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def parse_config(argv=None, environ=None) -> RunConfig:
    """Resolve a validated :class:`RunConfig` from flags, file and environment."""
    environ = os.environ if environ is None else environ
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = build_arg_parser().parse_args(_attach_values(argv))
    values = read_config_file(ns.config) if ns.config else {}
    for key in _PARSERS:
        text = getattr(ns, key)
        if text is not None:
            values[key] = _convert(key, text)
    if environ.get("MFHMC_SEED"):
        values["seed"] = _convert("seed", environ["MFHMC_SEED"])
    cfg = replace(RunConfig(), command=ns.command, **values)
    return validate(cfg)

"""Leapfrog integration and the single-stage / two-stage HMC transition kernels.

Random stream layout (one ``numpy.random.Generator`` per chain). Every
iteration of either kernel consumes, in order:

1. ``D`` standard normals for the momentum,
2. two uniforms ``(u1, u2)`` drawn as one block.

HMC uses ``u1`` and ignores ``u2``; MFHMC uses ``u1`` for the low-fidelity
stage and ``u2`` for the high-fidelity stage. Because the consumption does
not depend on any accept/reject outcome, a seeded HMC chain and a seeded
MFHMC chain stay aligned draw for draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol

import numpy as np

__all__ = [
    "ChainRecord",
    "GradientTarget",
    "IntegrationError",
    "KernelConfig",
    "PhasePoint",
    "as_state",
    "energy_error_trace",
    "hmc_step",
    "kinetic_energy",
    "leapfrog_trajectory",
    "mfhmc_step",
    "run_chain",
    "sample_momentum",
]


class GradientTarget(Protocol):
    """Unnormalized log-density with an analytic gradient."""

    dim: int

    def log_density(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...


class IntegrationError(RuntimeError):
    """Leapfrog integration hit a non-finite gradient.

    ``step`` is the index of the failing gradient call within the trajectory
    (0 is the initial half-kick, ``L`` the final one). ``iteration`` is filled
    in by :func:`run_chain`.
    """

    def __init__(self, step: int, iteration: int | None = None):
        self.step = step
        self.iteration = iteration
        msg = f"non-finite gradient at leapfrog step {step}"
        if iteration is not None:
            msg += f" (chain iteration {iteration})"
        super().__init__(msg)


@dataclass(frozen=True)
class KernelConfig:
    epsilon: float
    n_leapfrog: int
    n_steps: int
    burn_in_frac: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.n_leapfrog) != self.n_leapfrog or self.n_leapfrog < 1:
            raise ValueError(f"n_leapfrog must be a positive integer, got {self.n_leapfrog}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not 0.0 <= self.burn_in_frac < 1.0:
            raise ValueError(f"burn_in_frac must lie in [0, 1), got {self.burn_in_frac}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(int(self.seed))


def as_state(x) -> np.ndarray:
    """Validate and copy a parameter vector (1-D, non-empty, finite)."""
    arr = np.array(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"state must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state has non-finite entries")
    return arr


@dataclass(frozen=True)
class PhasePoint:
    position: np.ndarray
    momentum: np.ndarray

    def __post_init__(self):
        if np.shape(self.position) != np.shape(self.momentum):
            raise ValueError(
                f"position {np.shape(self.position)} and momentum "
                f"{np.shape(self.momentum)} differ in shape"
            )


def kinetic_energy(momentum: np.ndarray) -> float:
    """Identity-mass kinetic energy ``xi . xi / 2``."""
    return 0.5 * float(np.dot(momentum, momentum))


def sample_momentum(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return rng.standard_normal(dim)


def _finite_grad(g, step: int) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise IntegrationError(step)
    return g


def leapfrog_trajectory(
    start: PhasePoint,
    epsilon: float,
    n_leapfrog: int,
    grad_U: Callable[[np.ndarray], np.ndarray],
) -> PhasePoint:
    """Integrate ``n_leapfrog`` leapfrog steps and negate the final momentum.

    ``grad_U`` is the gradient of the potential (negative log-density) and is
    called exactly ``n_leapfrog + 1`` times.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if n_leapfrog < 1:
        raise ValueError(f"n_leapfrog must be >= 1, got {n_leapfrog}")
    x = np.array(start.position, dtype=float)
    xi = np.array(start.momentum, dtype=float)

    xi = xi - 0.5 * epsilon * _finite_grad(grad_U(x), 0)
    for step in range(1, n_leapfrog):
        x = x + epsilon * xi
        xi = xi - epsilon * _finite_grad(grad_U(x), step)
    x = x + epsilon * xi
    xi = xi - 0.5 * epsilon * _finite_grad(grad_U(x), n_leapfrog)
    return PhasePoint(x, -xi)


def energy_error_trace(
    start: PhasePoint,
    epsilon: float,
    n_leapfrog: int,
    U: Callable[[np.ndarray], float],
    grad_U: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Hamiltonian error ``H(x_l, xi_l) - H(x_0, xi_0)`` after each of the
    ``n_leapfrog`` steps, with momenta synchronised to the positions."""
    x = np.array(start.position, dtype=float)
    xi = np.array(start.momentum, dtype=float)
    h0 = U(x) + kinetic_energy(xi)
    g = _finite_grad(grad_U(x), 0)
    out = np.empty(n_leapfrog)
    for step in range(n_leapfrog):
        xi = xi - 0.5 * epsilon * g
        x = x + epsilon * xi
        g = _finite_grad(grad_U(x), step + 1)
        xi = xi - 0.5 * epsilon * g
        out[step] = U(x) + kinetic_energy(xi) - h0
    return out


def _accept(u: float, log_alpha: float) -> bool:
    # alpha = min(1, exp(log_alpha)); exp of a non-positive number never overflows
    return u < math.exp(min(0.0, log_alpha))


def _delta_h(lp_current: float, lp_proposal: float, xi0: np.ndarray, xi1: np.ndarray) -> float:
    if not math.isfinite(lp_proposal):
        return math.inf
    dh = (-lp_proposal + kinetic_energy(xi1)) - (-lp_current + kinetic_energy(xi0))
    return dh if not math.isnan(dh) else math.inf


class HmcTransition(NamedTuple):
    state: np.ndarray
    accepted: bool
    delta_H: float
    log_density: float  # log-density at ``state``, reusable as the next cache


class MfhmcTransition(NamedTuple):
    state: np.ndarray
    stage1: bool
    stage2: bool
    hf_log_density: float  # HF log-density at ``state``


def hmc_step(
    current: np.ndarray,
    target: GradientTarget,
    config: KernelConfig,
    rng: np.random.Generator,
    current_log_density: float | None = None,
) -> HmcTransition:
    """One single-stage HMC transition.

    ``current_log_density`` may carry the log-density at ``current`` from the
    previous iteration; it is evaluated when omitted.
    """
    xi0 = sample_momentum(rng, current.shape[0])
    u = rng.random(2)
    if current_log_density is None:
        current_log_density = float(target.log_density(current))

    end = leapfrog_trajectory(
        PhasePoint(current, xi0), config.epsilon, config.n_leapfrog, lambda x: -target.gradient(x)
    )
    lp_prop = float(target.log_density(end.position))
    dh = _delta_h(current_log_density, lp_prop, xi0, end.momentum)
    if _accept(u[0], -dh):
        return HmcTransition(end.position, True, dh, lp_prop)
    return HmcTransition(current, False, dh, current_log_density)


def mfhmc_step(
    current: np.ndarray,
    target,
    config: KernelConfig,
    rng: np.random.Generator,
    cached_hf_logdensity: float,
) -> MfhmcTransition:
    """One two-stage multi-fidelity HMC transition.

    Stage 1 is an HMC proposal/accept on the low-fidelity posterior. Only a
    proposal that survives it is scored by the high-fidelity density (one
    evaluation), and accepted with the delayed-acceptance ratio
    ``p_HF(x') p_LF(x) / (p_HF(x) p_LF(x'))``.
    """
    xi0 = sample_momentum(rng, current.shape[0])
    u = rng.random(2)
    lf_current = float(target.lf_log_density(current))

    end = leapfrog_trajectory(
        PhasePoint(current, xi0), config.epsilon, config.n_leapfrog, lambda x: -target.lf_gradient(x)
    )
    lf_prop = float(target.lf_log_density(end.position))
    dh = _delta_h(lf_current, lf_prop, xi0, end.momentum)
    if not _accept(u[0], -dh):
        return MfhmcTransition(current, False, False, cached_hf_logdensity)

    hf_prop = float(target.hf_log_density(end.position))
    if math.isfinite(hf_prop):
        log_ratio = (hf_prop - cached_hf_logdensity) + (lf_current - lf_prop)
        if math.isnan(log_ratio):
            log_ratio = -math.inf
    else:
        log_ratio = -math.inf
    if _accept(u[1], log_ratio):
        return MfhmcTransition(end.position, True, True, hf_prop)
    return MfhmcTransition(current, True, False, cached_hf_logdensity)


@dataclass
class ChainRecord:
    """Samples and per-iteration bookkeeping of one chain.

    ``samples`` has ``n_iterations + 1`` rows (the start state first). For
    HMC chains ``stage1_accepted`` and ``stage2_accepted`` hold the same flag,
    ``n_hf_cumulative`` counts log-density evaluations and
    ``n_grad_lf_cumulative`` counts gradient calls of the (single) target.
    """

    kernel: str
    samples: np.ndarray
    stage1_accepted: np.ndarray
    stage2_accepted: np.ndarray
    n_hf_cumulative: np.ndarray
    n_grad_lf_cumulative: np.ndarray
    epsilon: float
    n_leapfrog: int
    delta_H: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_iterations(self) -> int:
        return len(self.stage1_accepted)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n_accepted(self) -> int:
        return int(np.count_nonzero(self.stage2_accepted))

    @property
    def hf_density_evals(self) -> int:
        return int(self.n_hf_cumulative[-1]) if self.n_iterations else 1

    def hf_work_cumulative(self) -> np.ndarray:
        """HF cost after each iteration.

        MFHMC: HF density evaluations (including the initial one). HMC: two
        HF-equivalent solves (forward + adjoint) per leapfrog step, ``2 L``
        per iteration.
        """
        if self.kernel == "hmc":
            return 2 * self.n_leapfrog * np.arange(1, self.n_iterations + 1)
        return np.asarray(self.n_hf_cumulative)

    @property
    def hf_work(self) -> int:
        if self.n_iterations == 0:
            return 0 if self.kernel == "hmc" else 1
        return int(self.hf_work_cumulative()[-1])

    def truncate(self, n_iterations: int) -> "ChainRecord":
        """Prefix of the chain holding its first ``n_iterations`` iterations."""
        n = int(n_iterations)
        return ChainRecord(
            kernel=self.kernel,
            samples=self.samples[: n + 1],
            stage1_accepted=self.stage1_accepted[:n],
            stage2_accepted=self.stage2_accepted[:n],
            n_hf_cumulative=self.n_hf_cumulative[:n],
            n_grad_lf_cumulative=self.n_grad_lf_cumulative[:n],
            epsilon=self.epsilon,
            n_leapfrog=self.n_leapfrog,
            delta_H=self.delta_H[:n] if len(self.delta_H) else self.delta_H,
        )

    def truncate_to_budget(self, budget: int) -> "ChainRecord":
        """Prefix that a run capped at ``budget`` HF work would have produced:
        iterations continue while the spent work is below the cap."""
        work = self.hf_work_cumulative()
        hit = np.flatnonzero(work >= budget)
        if len(hit) == 0:
            return self
        return self.truncate(hit[0] + 1)


class _Counter:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.fn(x)


class _CountedGradientTarget:
    def __init__(self, target):
        self.dim = target.dim
        self.log_density = _Counter(target.log_density)
        self.gradient = _Counter(target.gradient)


class _CountedDualTarget:
    def __init__(self, target):
        self.dim = target.dim
        self.hf_log_density = _Counter(target.hf_log_density)
        self.lf_log_density = target.lf_log_density
        self.lf_gradient = _Counter(target.lf_gradient)


def run_chain(
    kernel: str,
    start,
    target,
    config: KernelConfig,
    max_hf_work: int | None = None,
) -> ChainRecord:
    """Run ``config.n_steps`` iterations of ``kernel`` ("hmc" or "mfhmc").

    ``target`` is a gradient target for HMC and a dual-fidelity target for
    MFHMC. With ``max_hf_work`` the chain also stops after the first iteration
    whose cumulative HF work (see :meth:`ChainRecord.hf_work_cumulative`)
    reaches the cap. Burn-in is kept; diagnostics drop it.
    """
    if kernel not in ("hmc", "mfhmc"):
        raise ValueError(f"unknown kernel {kernel!r}; expected 'hmc' or 'mfhmc'")
    x = as_state(start)
    if x.shape[0] != target.dim:
        raise ValueError(f"start has length {x.shape[0]}, target dim is {target.dim}")
    rng = config.rng()
    m, L = config.n_steps, config.n_leapfrog

    samples = [x]
    s1 = np.zeros(m, dtype=bool)
    s2 = np.zeros(m, dtype=bool)
    n_hf = np.zeros(m, dtype=np.int64)
    n_grad = np.zeros(m, dtype=np.int64)
    dhs = np.full(m, np.nan)

    if kernel == "hmc":
        counted = _CountedGradientTarget(target)
        cached = float(counted.log_density(x))
        hf_counter, grad_counter = counted.log_density, counted.gradient
    else:
        counted = _CountedDualTarget(target)
        cached = float(counted.hf_log_density(x))
        hf_counter, grad_counter = counted.hf_log_density, counted.lf_gradient
    if not math.isfinite(cached):
        raise ValueError("target log-density is not finite at the start state")
    if kernel == "mfhmc" and not math.isfinite(float(target.lf_log_density(x))):
        raise ValueError("low-fidelity log-density is not finite at the start state")

    n_done = m
    for i in range(m):
        try:
            if kernel == "hmc":
                step = hmc_step(x, counted, config, rng, current_log_density=cached)
                x, cached = step.state, step.log_density
                s1[i] = s2[i] = step.accepted
                dhs[i] = step.delta_H
            else:
                step = mfhmc_step(x, counted, config, rng, cached)
                x, cached = step.state, step.hf_log_density
                s1[i], s2[i] = step.stage1, step.stage2
        except IntegrationError as err:
            raise IntegrationError(err.step, iteration=i + 1) from err
        samples.append(x)
        n_hf[i] = hf_counter.calls
        n_grad[i] = grad_counter.calls
        if max_hf_work is not None:
            work = 2 * L * (i + 1) if kernel == "hmc" else n_hf[i]
            if work >= max_hf_work:
                n_done = i + 1
                break

    return ChainRecord(
        kernel=kernel,
        samples=np.asarray(samples),
        stage1_accepted=s1[:n_done],
        stage2_accepted=s2[:n_done],
        n_hf_cumulative=n_hf[:n_done],
        n_grad_lf_cumulative=n_grad[:n_done],
        epsilon=config.epsilon,
        n_leapfrog=L,
        delta_H=dhs[:n_done] if kernel == "hmc" else np.empty(0),
    )

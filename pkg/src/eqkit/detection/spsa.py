"""Probe design by simultaneous perturbation stochastic approximation.

The cost is the estimated Type-II error: the fraction of non-strategic
datasets that the statistical test wrongly accepts as Nash rational.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..rng import M_SAMPLES, NOISE, SPSA_COST, SPSA_DELTA, DATA, stream
from .generator import MaliciousGameSpec, generate_normal_agent_data
from .noise import NoiseModel
from .statistic import DEFAULT_MC, acceptance_threshold, phi_feasible, sample_M

P_FLOOR = 0.01


@dataclass(frozen=True)
class SpsaConfig:
    sigma: float = 0.1
    step: float = 0.2
    iterations: int = 300
    cost_samples: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.step < 0:
            raise ValueError("step must be nonnegative")
        if self.iterations < 0 or self.cost_samples < 1:
            raise ValueError("iterations must be >= 0 and cost_samples >= 1")


def type2_indicators(probes: np.ndarray, spec: MaliciousGameSpec, noise: NoiseModel, K: int,
                     gamma: float, seed: int, mc_samples: int = DEFAULT_MC) -> np.ndarray:
    """Per-sample acceptance (Type-II error) flags for non-strategic data.

    Sample ``k`` draws its actions and noise from streams labelled by
    ``(seed, k)`` only, so two probe vectors evaluated with the same seed
    see identical responses and noise. Acceptance is decided by a single
    feasibility solve at the acceptance threshold instead of a full
    bisection for ``phi*``.
    """
    probes = np.asarray(probes, dtype=float)
    n = spec.num_agents
    M = sample_M(probes, n, noise, mc_samples, stream(seed, SPSA_COST, M_SAMPLES))
    theta = acceptance_threshold(M, gamma)
    flags = np.zeros(K, dtype=bool)
    if theta < 0:
        return flags
    for k in range(K):
        data = generate_normal_agent_data(spec, probes, stream(seed, SPSA_COST, DATA, k))
        w = noise.sample(stream(seed, SPSA_COST, NOISE, k), data.actions.shape)
        flags[k] = phi_feasible(probes, data.actions + w, theta).feasible
    return flags


def spsa_cost(probes: np.ndarray, spec: MaliciousGameSpec, noise: NoiseModel, K: int,
              gamma: float, seed: int, mc_samples: int = DEFAULT_MC) -> float:
    """Estimated Type-II error probability at ``probes`` (in [0, 1])."""
    return float(type2_indicators(probes, spec, noise, K, gamma, seed, mc_samples).mean())


@dataclass
class SpsaTrace:
    probes: np.ndarray  # (Q + 1, T, m) iterates
    costs: np.ndarray  # (Q,) mean of the two perturbed costs per iteration
    cost_plus: np.ndarray
    cost_minus: np.ndarray

    @property
    def final_probes(self) -> np.ndarray:
        return self.probes[-1]


def spsa_optimize(p0: np.ndarray, cfg: SpsaConfig,
                  cost: Callable[[np.ndarray, int], float], p_floor: float = P_FLOOR) -> SpsaTrace:
    """Minimise ``cost(p, q)`` by SPSA.

    ``cost`` receives the iteration index so both perturbed evaluations of
    one iteration can share random numbers. Perturbed points and iterates
    are clamped at ``p_floor``.
    """
    p = np.array(p0, dtype=float)
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("initial probes must be strictly positive")
    Q = cfg.iterations
    iterates = np.empty((Q + 1,) + p.shape)
    iterates[0] = p
    cp, cm = np.empty(Q), np.empty(Q)
    for q in range(Q):
        delta = stream(cfg.rng_seed, SPSA_DELTA, q).choice([-1.0, 1.0], size=p.shape)
        jp = cost(np.maximum(p + cfg.sigma * delta, p_floor), q)
        jm = cost(np.maximum(p - cfg.sigma * delta, p_floor), q)
        grad = (jp - jm) / (2.0 * cfg.sigma * delta)
        p = np.maximum(p - cfg.step * grad, p_floor)
        iterates[q + 1] = p
        cp[q], cm[q] = jp, jm
    return SpsaTrace(iterates, 0.5 * (cp + cm), cp, cm)


def optimize_probes(spec: MaliciousGameSpec, noise: NoiseModel, cfg: SpsaConfig, T: int,
                    gamma: float = 0.05, mc_samples: int = DEFAULT_MC,
                    p0: np.ndarray | None = None) -> SpsaTrace:
    """SPSA on the Type-II cost for the malicious-agent setting.

    Initial probes are drawn from the generator spec's probe distribution unless given.
    """
    if p0 is None:
        p0 = spec.draw_probes(T, stream(cfg.rng_seed, SPSA_DELTA, DATA))

    def cost(p, q):
        return spsa_cost(p, spec, noise, cfg.cost_samples, gamma, _iteration_seed(cfg.rng_seed, q), mc_samples)

    return spsa_optimize(p0, cfg, cost)


def _iteration_seed(seed: int, q: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(SPSA_COST, int(q))).generate_state(1, np.uint64)[0])

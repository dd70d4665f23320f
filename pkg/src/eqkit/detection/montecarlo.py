"""Monte Carlo estimates of Type-I and Type-II error rates."""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from ..parallel import parallel_map
from ..rng import DATA, M_SAMPLES, MONTE_CARLO, NOISE, stream
from .generator import MaliciousGameSpec, generate_normal_agent_data, generate_potential_game_data
from .noise import NoiseModel, NoisyDataset
from .statistic import DEFAULT_MC, estimate_M_tail, test_statistic_phi

NASH_RATIONAL = 0
NORMAL_AGENTS = 1


@dataclass(frozen=True)
class TrialResult:
    phi_star: float
    tail_probability: float
    rejected: bool


def run_trial(rep: int, *, population: int, spec: MaliciousGameSpec, noise: NoiseModel, T: int,
              gamma: float, seed: int, probes: np.ndarray | None = None,
              mc_samples: int = DEFAULT_MC) -> TrialResult:
    """One repetition: draw data, add noise, run the statistical test.

    Repetition ``rep`` of a population uses its own streams, so results do
    not depend on how repetitions are distributed over workers. Without
    fixed ``probes`` each repetition draws its own from the generator spec.
    """
    key = (MONTE_CARLO, population, rep)
    data_rng = stream(seed, *key, DATA)
    p = spec.draw_probes(T, data_rng) if probes is None else np.asarray(probes, dtype=float)
    if population == NASH_RATIONAL:
        data = generate_potential_game_data(spec, T, data_rng, probes=p)
    else:
        data = generate_normal_agent_data(spec, p, data_rng)
    obs = NoisyDataset.observe(data, noise, stream(seed, *key, NOISE))
    phi = test_statistic_phi(obs)
    tail = estimate_M_tail(p, spec.num_agents, noise, phi, mc_samples, stream(seed, *key, M_SAMPLES))
    return TrialResult(phi, tail, not tail > gamma)


@dataclass(frozen=True)
class ErrorRate:
    rate: float
    count: int
    repetitions: int

    @property
    def standard_error(self) -> float:
        r = self.rate
        return float(np.sqrt(max(r * (1 - r), 0.0) / self.repetitions))

    def to_dict(self) -> dict:
        return {"rate": self.rate, "count": self.count, "repetitions": self.repetitions,
                "standard_error": self.standard_error}


def error_rate(population: int, repetitions: int, spec: MaliciousGameSpec, noise: NoiseModel,
               T: int, gamma: float, seed: int, probes: np.ndarray | None = None,
               mc_samples: int = DEFAULT_MC, workers: int | None = None) -> tuple[ErrorRate, list[TrialResult]]:
    """Type-I rate for the Nash-rational population, Type-II rate for normal agents."""
    fn = partial(run_trial, population=population, spec=spec, noise=noise, T=T, gamma=gamma,
                 seed=seed, probes=probes, mc_samples=mc_samples)
    trials = parallel_map(fn, range(repetitions), workers=workers)
    if population == NASH_RATIONAL:
        errors = sum(t.rejected for t in trials)
    else:
        errors = sum(not t.rejected for t in trials)
    return ErrorRate(errors / repetitions, errors, repetitions), trials


def type1_rate(repetitions, spec, noise, T, gamma, seed, **kw):
    return error_rate(NASH_RATIONAL, repetitions, spec, noise, T, gamma, seed, **kw)


def type2_rate(repetitions, spec, noise, T, gamma, seed, **kw):
    return error_rate(NORMAL_AGENTS, repetitions, spec, noise, T, gamma, seed, **kw)

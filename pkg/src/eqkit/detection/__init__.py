"""Detection of equilibrium play from noisy probe/response data."""

from .generator import (
    ConvergenceError,
    MaliciousGameSpec,
    generate_normal_agent_data,
    generate_potential_game_data,
    malicious_utility,
    maximize_potential,
    potential,
    water_filling,
)
from .montecarlo import ErrorRate, TrialResult, type1_rate, type2_rate
from .noise import NoiseModel, NoisyDataset
from .spsa import SpsaConfig, SpsaTrace, optimize_probes, spsa_cost, spsa_optimize
from .statistic import (
    TestOutcome,
    acceptance_threshold,
    estimate_M_tail,
    sample_M,
    statistical_test,
    test_statistic_phi,
)

__all__ = [
    "ConvergenceError",
    "ErrorRate",
    "MaliciousGameSpec",
    "NoiseModel",
    "NoisyDataset",
    "SpsaConfig",
    "SpsaTrace",
    "TestOutcome",
    "TrialResult",
    "acceptance_threshold",
    "estimate_M_tail",
    "generate_normal_agent_data",
    "generate_potential_game_data",
    "malicious_utility",
    "maximize_potential",
    "optimize_probes",
    "potential",
    "sample_M",
    "spsa_cost",
    "spsa_optimize",
    "statistical_test",
    "test_statistic_phi",
    "type1_rate",
    "type2_rate",
    "water_filling",
]

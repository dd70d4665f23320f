"""Regret matching with diffusion cooperation over a social graph.

Each agent keeps an individual regret matrix ``R`` and a fused matrix ``Rbar``
(its neighbourhood average). A round is: draw an action from the strategy
built on ``Rbar`` and the previous action, update ``R`` from the realised
payoff, then fuse neighbours' fresh ``R`` through the weight matrix ``W``.
The isolated baseline is the same loop with ``W = I``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .game import (
    ConnectivityGraph,
    NormalFormGame,
    build_weight_matrix,
)
from .rng import LEARNING, stream


class ConfigError(ValueError):
    pass


def agent_rng(seed: int, run: int, agent: int) -> np.random.Generator:
    """Counter-based stream for one (run, agent) pair."""
    return stream(seed, LEARNING, run, agent)


@dataclass(frozen=True)
class LearnerConfig:
    step_size: float
    exploration: float
    inertia: float
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.step_size < 1.0:
            raise ConfigError(f"step size must lie in (0, 1), got {self.step_size}")
        if not 0.0 < self.exploration < 1.0:
            raise ConfigError(f"exploration must lie in (0, 1), got {self.exploration}")
        if not self.inertia > 0.0:
            raise ConfigError("inertia must be positive")

    @classmethod
    def for_game(cls, game: NormalFormGame, step_size: float, exploration: float,
                 inertia: float | None = None, rng_seed: int = 0) -> "LearnerConfig":
        """Config with the default inertia ``1.1 * A * (u_max - u_min)``."""
        if inertia is None:
            span = game.u_max - game.u_min
            inertia = 1.1 * game.num_actions * span if span > 0 else 1.0
        cfg = cls(step_size, exploration, inertia, rng_seed)
        cfg.check_inertia(game)
        return cfg

    def check_inertia(self, game: NormalFormGame) -> None:
        bound = game.num_actions * abs(game.u_max - game.u_min)
        if not self.inertia > bound:
            raise ConfigError(f"inertia {self.inertia} must exceed A*|u_max - u_min| = {bound}")


@dataclass(frozen=True)
class RegretState:
    individual: np.ndarray
    fused: np.ndarray
    prev_action: int  # 1-based

    @classmethod
    def initial(cls, num_actions: int, prev_action: int) -> "RegretState":
        z = np.zeros((num_actions, num_actions))
        return cls(z, z.copy(), prev_action)


def regret_bound(game: NormalFormGame, exploration: float) -> float:
    """Sup-norm bound on any regret entry reachable by the recursion.

    Regrets are convex combinations of instantaneous matrices whose entries
    are at most ``U * A / delta`` with ``U = max|u|``; the extra ``U`` is slack.
    """
    U = max(abs(game.u_max), abs(game.u_min))
    return U * game.num_actions / exploration + U


def strategy_from_regret(state: RegretState, cfg: LearnerConfig, num_actions: int) -> np.ndarray:
    """Regret-matching strategy with exploration, read from the fused regrets."""
    A = num_actions
    prev = state.prev_action - 1
    if not 0 <= prev < A:
        raise ValueError(f"previous action {state.prev_action} outside 1..{A}")
    delta = cfg.exploration
    row = np.maximum(state.fused[prev], 0.0)
    p = (1.0 - delta) * np.minimum(row / cfg.inertia, 1.0 / A) + delta / A
    p[prev] = 0.0
    p[prev] = 1.0 - p.sum()
    return p


def _inverse_cdf(p: np.ndarray, u) -> np.ndarray:
    cdf = np.cumsum(p, axis=-1)
    idx = np.sum(cdf <= np.asarray(u)[..., None], axis=-1)
    return np.minimum(idx, p.shape[-1] - 1)


def sample_action(p, rng: np.random.Generator) -> int:
    """Draw a 1-based action by inverse CDF over increasing indices."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p must be a probability vector")
    return int(_inverse_cdf(p, rng.random())) + 1


def instantaneous_regret(action: int, payoff: float, p) -> np.ndarray:
    """``f_ij = p(i)/p(j) u I(a=j) - u I(a=i)`` for the played action ``a`` (1-based)."""
    p = np.asarray(p, dtype=float)
    a = action - 1
    F = np.zeros((p.size, p.size))
    F[:, a] = p / p[a] * payoff
    F[a, :] -= payoff
    F[a, a] = 0.0
    return F


def regret_update(state: RegretState, F: np.ndarray, eps: float) -> RegretState:
    """New individual regrets ``Rbar + eps (F - Rbar)``; fused part is untouched."""
    R = state.fused + eps * (F - state.fused)
    return RegretState(R, state.fused, state.prev_action)


def fuse_regrets(matrices: Sequence[np.ndarray], W: np.ndarray, k: int) -> np.ndarray:
    """Weighted neighbourhood combination for agent ``k`` (0-based)."""
    return np.tensordot(W[k], np.stack(matrices), axes=1)


def distance_to_ce(matrices: Sequence[np.ndarray] | np.ndarray) -> float:
    """Max over agents of the Frobenius norm of the positive regret part."""
    R = np.asarray(matrices, dtype=float)
    pos = np.maximum(R, 0.0)
    return float(np.sqrt((pos**2).sum(axis=(-2, -1))).max())


@dataclass
class SimulationTrace:
    mean_d: np.ndarray
    std_d: np.ndarray
    d: np.ndarray  # (runs, horizon)
    final_z: np.ndarray  # (runs, A**K)
    z_at: dict = field(default_factory=dict)  # n -> (runs, A**K)

    def at(self, n: int) -> float:
        """Run-averaged distance after ``n`` plays (1-based)."""
        return float(self.mean_d[n - 1])


def run_simulation(
    game: NormalFormGame,
    graph: ConnectivityGraph | None,
    C,
    cfg: LearnerConfig,
    horizon: int,
    num_runs: int,
    variant: Literal["diffusion", "isolated"] = "diffusion",
    *,
    fuse_source: Literal["individual", "fused"] = "individual",
    checkpoints: Sequence[int] = (),
    first_run: int = 0,
) -> SimulationTrace:
    """Monte Carlo runs of the learning loop, batched over runs.

    ``fuse_source="fused"`` combines neighbours' previous fused matrices
    instead of their fresh individual ones (the literal reading of the
    fusion step; it never feeds new observations through W).
    Run ``r`` uses streams ``(cfg.rng_seed, first_run + r, agent)``, so a
    variant comparison under the same seed shares random numbers.
    """
    K, A = game.num_agents, game.num_actions
    cfg.check_inertia(game)
    if horizon < 1 or num_runs < 1:
        raise ConfigError("horizon and num_runs must be positive")
    if variant == "isolated":
        W = np.eye(K)
    elif variant == "diffusion":
        if C is None:
            C = graph.metropolis_generator() if graph is not None else np.zeros((K, K))
        W = build_weight_matrix(C, cfg.step_size, graph)
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    if W.shape != (K, K):
        raise ConfigError("weight matrix size does not match the game")
    if fuse_source not in ("individual", "fused"):
        raise ConfigError(f"unknown fuse_source {fuse_source!r}")

    eps, delta, mu = cfg.step_size, cfg.exploration, cfg.inertia
    M = num_runs
    flat = game.flat_payoffs()
    radix = A ** np.arange(K - 1, -1, -1)
    gens = [[agent_rng(cfg.rng_seed, first_run + r, k) for k in range(K)] for r in range(M)]

    R = np.zeros((M, K, A, A))
    Rbar = np.zeros((M, K, A, A))
    u0 = np.array([[g.random() for g in row] for row in gens])
    prev = _inverse_cdf(np.full((M, K, A), 1.0 / A), u0)

    d = np.empty((M, horizon))
    z = np.zeros((M, A**K))
    z_at = {}
    wanted = set(int(n) for n in checkpoints)
    mi, ki = np.meshgrid(np.arange(M), np.arange(K), indexing="ij")
    chunk = 1024

    for start in range(0, horizon, chunk):
        steps = min(chunk, horizon - start)
        U = np.stack([np.stack([g.random(steps) for g in row]) for row in gens])  # (M, K, steps)
        for s in range(steps):
            n = start + s + 1
            row = np.maximum(Rbar[mi, ki, prev], 0.0)  # (M, K, A)
            p = (1.0 - delta) * np.minimum(row / mu, 1.0 / A) + delta / A
            p[mi, ki, prev] = 0.0
            p[mi, ki, prev] = 1.0 - p.sum(axis=-1)
            act = _inverse_cdf(p, U[:, :, s])  # 0-based (M, K)
            idx = act @ radix
            pay = flat[idx]  # (M, K)

            F = np.zeros((M, K, A, A))
            pa = p[mi, ki, act]
            F[mi, ki, :, act] = p / pa[..., None] * pay[..., None]
            F[mi, ki, act, :] -= pay[..., None]
            F[mi, ki, act, act] = 0.0

            Rnew = Rbar + eps * (F - Rbar)
            src = Rnew if fuse_source == "individual" else Rbar
            Rbar = np.einsum("kl,mlij->mkij", W, src)
            R = Rnew
            prev = act

            pos = np.maximum(R, 0.0)
            d[:, n - 1] = np.sqrt((pos**2).sum(axis=(-2, -1))).max(axis=1)
            if n == 1:
                z[:] = 0.0
                z[np.arange(M), idx] = 1.0
            else:
                z *= 1.0 - eps
                z[np.arange(M), idx] += eps
            if n in wanted:
                z_at[n] = z.copy()

    return SimulationTrace(d.mean(axis=0), d.std(axis=0), d, z, z_at)


def simulate_single_run(game: NormalFormGame, W: np.ndarray, cfg: LearnerConfig, horizon: int,
                        run: int = 0, fuse_source: str = "individual", history: list | None = None):
    """Unbatched reference loop built from the per-agent operations.

    Returns ``(d, states, profiles)``; used to cross-check :func:`run_simulation`.
    If ``history`` is a list, the (K, A, A) individual regrets after every
    step are appended to it.
    """
    K, A = game.num_agents, game.num_actions
    gens = [agent_rng(cfg.rng_seed, run, k) for k in range(K)]
    states = [RegretState.initial(A, sample_action(np.full(A, 1.0 / A), g)) for g in gens]
    d, profiles = [], []
    for _ in range(horizon):
        strategies = [strategy_from_regret(s, cfg, A) for s in states]
        actions = [sample_action(p, g) for p, g in zip(strategies, gens)]
        pay = game.utility(actions)
        updated = [
            regret_update(s, instantaneous_regret(a, pay[k], p), cfg.step_size)
            for k, (s, a, p) in enumerate(zip(states, actions, strategies))
        ]
        src = [u.individual for u in updated] if fuse_source == "individual" else [s.fused for s in states]
        states = [
            RegretState(u.individual, fuse_regrets(src, W, k), actions[k])
            for k, u in enumerate(updated)
        ]
        if history is not None:
            history.append(np.stack([s.individual for s in states]))
        d.append(distance_to_ce([s.individual for s in states]))
        profiles.append(tuple(actions))
    return np.array(d), states, profiles

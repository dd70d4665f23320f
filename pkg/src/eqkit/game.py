"""Normal-form games, connectivity graphs, diffusion weights and correlated equilibria.

Actions are 1-based at the public surface (``profile=(2, 2, 1)``) and 0-based
inside arrays. Joint profiles are encoded mixed-radix with agent 1 as the most
significant digit, so ``profile_index((1,) * K) == 0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-9


class WeightMatrixError(ValueError):
    """C or W breaks one of the diffusion-weight conditions."""


def _check_profile(profile: Sequence[int], num_agents: int, num_actions: int) -> tuple[int, ...]:
    prof = tuple(int(a) for a in profile)
    if len(prof) != num_agents:
        raise ValueError(f"profile has {len(prof)} actions, game has {num_agents} agents")
    for k, a in enumerate(prof):
        if not 1 <= a <= num_actions:
            raise ValueError(f"action {a} of agent {k + 1} outside 1..{num_actions}")
    return prof


def profile_index(profile: Sequence[int], num_actions: int) -> int:
    """Mixed-radix index of a 1-based joint profile."""
    idx = 0
    for a in profile:
        idx = idx * num_actions + (int(a) - 1)
    return idx


def index_profile(index: int, num_agents: int, num_actions: int) -> tuple[int, ...]:
    """Inverse of :func:`profile_index`."""
    digits = []
    for _ in range(num_agents):
        index, r = divmod(index, num_actions)
        digits.append(r + 1)
    return tuple(reversed(digits))


@dataclass(frozen=True)
class NormalFormGame:
    """Dense payoff tensor of shape ``(A,) * K + (K,)``."""

    payoffs: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        pay = np.array(self.payoffs, dtype=float)
        if pay.ndim < 2:
            raise ValueError("payoff tensor needs at least one action axis and a utility axis")
        K = pay.ndim - 1
        if pay.shape[-1] != K:
            raise ValueError(f"last axis must hold {K} utilities, got {pay.shape[-1]}")
        if len(set(pay.shape[:-1])) != 1:
            raise ValueError("all agents must share one action set")
        if not np.all(np.isfinite(pay)):
            raise ValueError("payoffs must be finite")
        pay.setflags(write=False)
        object.__setattr__(self, "payoffs", pay)
        if self.symmetric and not self.is_symmetric():
            raise ValueError("game flagged symmetric but the symmetry condition fails")

    @classmethod
    def from_profiles(cls, num_agents: int, num_actions: int, entries, symmetric: bool = False):
        """Build from ``[(profile, utilities), ...]`` with 1-based profiles; all A^K required."""
        pay = np.full((num_actions,) * num_agents + (num_agents,), np.nan)
        seen = set()
        for profile, utils in entries:
            prof = _check_profile(profile, num_agents, num_actions)
            if prof in seen:
                raise ValueError(f"profile {prof} given twice")
            seen.add(prof)
            utils = np.asarray(utils, dtype=float)
            if utils.shape != (num_agents,):
                raise ValueError(f"profile {prof}: expected {num_agents} utilities")
            pay[tuple(a - 1 for a in prof)] = utils
        if len(seen) != num_actions**num_agents:
            missing = num_actions**num_agents - len(seen)
            raise ValueError(f"{missing} joint profiles have no payoff")
        return cls(pay, symmetric=symmetric)

    @property
    def num_agents(self) -> int:
        return self.payoffs.ndim - 1

    @property
    def num_actions(self) -> int:
        return self.payoffs.shape[0]

    @property
    def num_profiles(self) -> int:
        return self.num_actions**self.num_agents

    @property
    def u_min(self) -> float:
        return float(self.payoffs.min())

    @property
    def u_max(self) -> float:
        return float(self.payoffs.max())

    def utility(self, profile: Sequence[int]) -> np.ndarray:
        prof = _check_profile(profile, self.num_agents, self.num_actions)
        return self.payoffs[tuple(a - 1 for a in prof)].copy()

    def flat_payoffs(self) -> np.ndarray:
        """``(A**K, K)`` table indexed by :func:`profile_index`."""
        return self.payoffs.reshape(self.num_profiles, self.num_agents)

    def profiles(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(range(1, self.num_actions + 1), repeat=self.num_agents)

    def is_symmetric(self, agents: Sequence[int] | None = None, atol: float = ATOL) -> bool:
        """Check the exchange condition between every pair of the given (1-based) agents.

        For agents k, l: swapping their actions while the rest stay put must
        swap their payoffs.
        """
        K = self.num_agents
        group = range(1, K + 1) if agents is None else agents
        group = [int(k) - 1 for k in group]
        for k, l in itertools.combinations(group, 2):
            swapped = np.swapaxes(self.payoffs, k, l)
            if not np.allclose(self.payoffs[..., k], swapped[..., l], atol=atol, rtol=0):
                return False
        return True

    def pure_nash_equilibria(self) -> list[tuple[int, ...]]:
        """All pure profiles where no agent gains by a unilateral switch (brute force)."""
        out = []
        for prof in self.profiles():
            idx = tuple(a - 1 for a in prof)
            stable = True
            for k in range(self.num_agents):
                here = self.payoffs[idx + (k,)]
                dev = list(idx)
                for b in range(self.num_actions):
                    dev[k] = b
                    if self.payoffs[tuple(dev) + (k,)] > here + ATOL:
                        stable = False
                        break
                if not stable:
                    break
            if stable:
                out.append(prof)
        return out


def utility(game: NormalFormGame, profile: Sequence[int]) -> np.ndarray:
    return game.utility(profile)


@dataclass(frozen=True)
class ConnectivityGraph:
    """Simple undirected graph on agents 1..K."""

    num_agents: int
    edges: frozenset

    def __init__(self, num_agents: int, edges: Iterable[Sequence[int]] = ()):
        if num_agents < 1:
            raise ValueError("need at least one agent")
        norm = set()
        for e in edges:
            k, l = (int(v) for v in e)
            if k == l:
                raise ValueError(f"self loop at agent {k}")
            if not (1 <= k <= num_agents and 1 <= l <= num_agents):
                raise ValueError(f"edge ({k}, {l}) references an unknown agent")
            pair = (min(k, l), max(k, l))
            # (k,l) and (l,k) name the same undirected edge
            norm.add(pair)
        object.__setattr__(self, "num_agents", int(num_agents))
        object.__setattr__(self, "edges", frozenset(norm))

    def neighbors(self, k: int) -> set[int]:
        return {l if j == k else j for j, l in self.edges if k in (j, l)}

    def closed_neighbors(self, k: int) -> set[int]:
        return self.neighbors(k) | {k}

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.num_agents, self.num_agents), dtype=bool)
        for k, l in self.edges:
            adj[k - 1, l - 1] = adj[l - 1, k - 1] = True
        return adj

    def metropolis_generator(self) -> np.ndarray:
        """A C matrix satisfying the weight conditions: Metropolis weights on edges."""
        adj = self.adjacency()
        deg = adj.sum(axis=1)
        C = np.zeros((self.num_agents, self.num_agents))
        for k, l in self.edges:
            w = 1.0 / (1.0 + max(deg[k - 1], deg[l - 1]))
            C[k - 1, l - 1] = C[l - 1, k - 1] = w
        C[np.diag_indices_from(C)] = -C.sum(axis=1)
        return C


def validate_generator(C: np.ndarray, graph: ConnectivityGraph | None = None, atol: float = ATOL) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise WeightMatrixError("C must be square")
    K = C.shape[0]
    if graph is not None and graph.num_agents != K:
        raise WeightMatrixError(f"C is {K}x{K} but the graph has {graph.num_agents} agents")
    if not np.allclose(C, C.T, atol=atol, rtol=0):
        raise WeightMatrixError("C is not symmetric")
    if not np.allclose(C.sum(axis=1), 0.0, atol=atol, rtol=0):
        raise WeightMatrixError("rows of C do not sum to zero")
    off = ~np.eye(K, dtype=bool)
    if np.any(C[off] < -atol):
        raise WeightMatrixError("C has a negative off-diagonal entry")
    if np.any(np.abs(C[off]) > 1 + atol):
        raise WeightMatrixError("C has an off-diagonal entry larger than 1 in magnitude")
    if graph is not None:
        adj = graph.adjacency()
        support = (C > atol) & off
        if np.any(support & ~adj):
            k, l = np.argwhere(support & ~adj)[0] + 1
            raise WeightMatrixError(f"C has positive weight on ({k}, {l}) which is not an edge")
        if np.any(adj & ~support):
            k, l = np.argwhere(adj & ~support)[0] + 1
            raise WeightMatrixError(f"edge ({k}, {l}) has no positive weight in C")
    return C


def build_weight_matrix(C, eps: float, graph: ConnectivityGraph | None = None) -> np.ndarray:
    """``W = I + eps * C`` after checking C (and the support against ``graph``).

    Raises :class:`WeightMatrixError` naming the failed condition, including
    ``eps * max|c_kk| > 1`` which would make W negative.
    """
    if not 0.0 < eps < 1.0:
        raise WeightMatrixError(f"step size must lie in (0, 1), got {eps}")
    C = validate_generator(C, graph)
    if eps * np.max(np.abs(np.diag(C)), initial=0.0) > 1.0:
        raise WeightMatrixError("eps * max|c_kk| exceeds 1, W would have negative entries")
    W = np.eye(C.shape[0]) + eps * C
    # make rows sum to one exactly, the diagonal absorbs rounding
    W[np.diag_indices_from(W)] = 0.0
    W[np.diag_indices_from(W)] = 1.0 - W.sum(axis=1)
    W.setflags(write=False)
    return W


@dataclass(frozen=True)
class GlobalBehavior:
    """Discounted empirical frequency of joint profiles."""

    z: np.ndarray
    step_size: float

    @classmethod
    def start(cls, profile: Sequence[int], num_actions: int, step_size: float) -> "GlobalBehavior":
        if not 0.0 < step_size < 1.0:
            raise ValueError("step size must lie in (0, 1)")
        z = np.zeros(num_actions ** len(profile))
        z[profile_index(profile, num_actions)] = 1.0
        return cls(z, step_size)

    def is_valid(self, atol: float = ATOL) -> bool:
        return bool(np.all(self.z >= -atol) and abs(self.z.sum() - 1.0) <= atol)


def update_global_behavior(z: GlobalBehavior, profile: Sequence[int], num_actions: int) -> GlobalBehavior:
    """One step of ``z <- z + eps (e_profile - z)``."""
    prof = _check_profile(profile, len(profile), num_actions)
    if num_actions ** len(prof) != z.z.size:
        raise ValueError("profile length does not match the behaviour vector")
    eps = z.step_size
    new = (1.0 - eps) * z.z
    new[profile_index(prof, num_actions)] += eps
    return GlobalBehavior(new, eps)


def ce_epsilon_violation(game: NormalFormGame, pi) -> float:
    """Largest conditional deviation gain under the joint distribution ``pi``.

    Returns ``max_{k,i,j} sum_{a^-k} pi(i, a^-k) [u^k(j, a^-k) - u^k(i, a^-k)]``;
    ``pi`` lies in the correlated eps-equilibrium set exactly when this is <= eps.
    The ``i == j`` terms make the result non-negative.
    """
    K, A = game.num_agents, game.num_actions
    pi = np.asarray(pi, dtype=float).reshape((A,) * K)
    if np.any(pi < -ATOL) or abs(pi.sum() - 1.0) > 1e-6:
        raise ValueError("pi must be a probability distribution over joint profiles")
    worst = 0.0
    for k in range(K):
        pk = np.moveaxis(pi, k, 0).reshape(A, -1)
        uk = np.moveaxis(game.payoffs[..., k], k, 0).reshape(A, -1)
        # gain[i, j] = sum_rest pk[i] * (uk[j] - uk[i])
        gain = pk @ uk.T - np.sum(pk * uk, axis=1)[:, None]
        worst = max(worst, float(gain.max()))
    return worst


def table1_game() -> NormalFormGame:
    """Three-agent, two-action example game; agents 1 and 2 are exchangeable."""
    entries = [
        ((1, 1, 1), (2, 2, 5)),
        ((1, 2, 1), (3, 6, 4)),
        ((2, 1, 1), (6, 3, 4)),
        ((2, 2, 1), (4, 4, 6)),
        ((1, 1, 2), (1, 1, 3)),
        ((1, 2, 2), (1, 4, 5)),
        ((2, 1, 2), (4, 1, 0)),
        ((2, 2, 2), (6, 6, 4)),
    ]
    return NormalFormGame.from_profiles(3, 2, entries)


def table1_graph() -> tuple[ConnectivityGraph, np.ndarray]:
    """Agents 1-2 linked with weight 1/4, agent 3 isolated."""
    graph = ConnectivityGraph(3, [(1, 2)])
    C = np.array([[-0.25, 0.25, 0.0], [0.25, -0.25, 0.0], [0.0, 0.0, 0.0]])
    return graph, C

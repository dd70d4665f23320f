"""Revealed-preference tests: Afriat inequalities, GARP, and the multi-agent
(potential game) analogue, with the reconstructed concave functions.

Datasets hold probes ``p`` of shape ``(T, m)`` and actions ``x`` of shape
``(T, n, m)``. Observation indices in user-facing output are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import FEAS_TOL, LinearSystem, feasible

KINK_TOL = 1e-9


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    probes: np.ndarray  # (T, m), strictly positive
    actions: np.ndarray  # (T, n, m), nonnegative

    def __post_init__(self):
        p = np.asarray(self.probes, dtype=float)
        x = np.asarray(self.actions, dtype=float)
        if p.ndim != 2:
            raise DatasetError("probes must be a (T, m) array")
        if x.ndim == 2:
            x = x[:, None, :]
        if x.ndim != 3:
            raise DatasetError("actions must be a (T, n, m) or (T, m) array")
        if p.shape[0] < 1:
            raise DatasetError("T >= 1 required")
        if x.shape[0] != p.shape[0] or x.shape[2] != p.shape[1]:
            raise DatasetError(f"actions shape {x.shape} does not match probes shape {p.shape}")
        if x.shape[1] < 1 or p.shape[1] < 1:
            raise DatasetError("need at least one agent and one probe dimension")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(x))):
            raise DatasetError("probes and actions must be finite")
        if np.any(p <= 0.0):
            raise DatasetError("probe entries must be strictly positive")
        if np.any(x < 0.0):
            raise DatasetError("actions must be nonnegative")
        p.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "probes", p)
        object.__setattr__(self, "actions", x)

    @property
    def T(self) -> int:
        return self.probes.shape[0]

    @property
    def m(self) -> int:
        return self.probes.shape[1]

    @property
    def n(self) -> int:
        return self.actions.shape[1]

    def budgets(self) -> np.ndarray:
        """Observed expenditure ``p_t'x_t^i``, shape (T, n)."""
        return np.einsum("tm,tim->ti", self.probes, self.actions)

    def agent(self, i: int) -> "Dataset":
        """Single-agent slice for agent ``i`` (0-based)."""
        return Dataset(self.probes, self.actions[:, i : i + 1, :])

    def prefix(self, T: int) -> "Dataset":
        return Dataset(self.probes[:T], self.actions[:T])


def cross_expenditure(probes: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """``a[i, t, s] = p_t'(x_s^i - x_t^i)`` for actions of shape (T, n, m)."""
    cost = np.einsum("tm,sim->its", probes, actions)  # p_t'x_s^i
    own = np.einsum("iss->is", cost)
    return cost - own[:, :, None]


# ---------------------------------------------------------------- Afriat


@dataclass(frozen=True)
class AfriatCertificate:
    u: np.ndarray  # (T,)
    lam: np.ndarray  # (T,), each >= 1

    def max_violation(self, data: Dataset) -> float:
        """Largest breach of the Afriat inequalities or of ``lam >= 1``."""
        a = cross_expenditure(data.probes, data.actions)[0]  # a[t, s]
        lhs = self.u[None, :] - self.u[:, None] - self.lam[:, None] * a
        return float(max(lhs.max(), (1.0 - self.lam).max(), 0.0))


@dataclass(frozen=True)
class AfriatResult:
    passed: bool
    certificate: AfriatCertificate | None = None

    def __bool__(self) -> bool:
        return self.passed


def _require_single_agent(data: Dataset) -> None:
    if data.n != 1:
        raise DatasetError(f"expected a single-agent dataset, got n = {data.n}")


def afriat_system(data: Dataset) -> LinearSystem:
    """Variables ``[u_1..u_T, lam_1..lam_T]``; one row per ordered pair t != s.

    ``u >= 0`` is imposed without loss of generality since the inequalities
    only involve utility differences.
    """
    _require_single_agent(data)
    T = data.T
    a = cross_expenditure(data.probes, data.actions)[0]
    t_idx, s_idx = np.nonzero(~np.eye(T, dtype=bool))
    G = np.zeros((t_idx.size, 2 * T))
    rows = np.arange(t_idx.size)
    G[rows, s_idx] += 1.0
    G[rows, t_idx] -= 1.0
    G[rows, T + t_idx] = -a[t_idx, s_idx]
    lb = np.concatenate([np.zeros(T), np.ones(T)])
    return LinearSystem(G, np.zeros(t_idx.size), lb)


def afriat_test(data: Dataset) -> AfriatResult:
    """Feasibility of ``u_s - u_t - lam_t p_t'(x_s - x_t) <= 0`` with ``lam >= 1``."""
    _require_single_agent(data)
    T = data.T
    if T == 1:
        return AfriatResult(True, AfriatCertificate(np.zeros(1), np.ones(1)))
    res = feasible(afriat_system(data))
    if not res.feasible:
        return AfriatResult(False)
    return AfriatResult(True, AfriatCertificate(res.point[:T].copy(), res.point[T:].copy()))


@dataclass(frozen=True)
class GarpResult:
    passed: bool
    cycle: tuple[int, ...] = ()  # 1-based, first == last

    def __bool__(self) -> bool:
        return self.passed


def garp_check(data: Dataset) -> GarpResult:
    """GARP by Warshall closure of the direct revealed-preference relation.

    ``t R0 s`` iff ``p_t'x_t >= p_t'x_s``. A violation is ``t R s`` together
    with ``p_s'x_s > p_s'x_t``; the witness is the closed path
    ``t -> ... -> s -> t``.
    """
    _require_single_agent(data)
    p, x = data.probes, data.actions[:, 0, :]
    T = data.T
    cost = p @ x.T  # cost[t, s] = p_t'x_s
    own = np.diag(cost)
    R = own[:, None] >= cost
    nxt = np.where(R, np.arange(T)[None, :], -1)
    for k in range(T):
        new = R[:, k, None] & R[None, k, :] & ~R
        if new.any():
            nxt = np.where(new, nxt[:, k, None], nxt)
            R |= new
    strict = own[:, None] > cost  # strict[s, t]: p_s'x_s > p_s'x_t
    bad = R & strict.T
    if not bad.any():
        return GarpResult(True)
    t, s = map(int, np.argwhere(bad)[0])
    path = [t]
    while path[-1] != s:
        path.append(int(nxt[path[-1], s]))
    path.append(t)
    return GarpResult(False, tuple(i + 1 for i in path))


def reconstruct_utility(cert: AfriatCertificate, data: Dataset, x) -> np.ndarray | float:
    """Lower envelope ``min_t {u_t + lam_t p_t'(x - x_t)}``; ``x`` may be batched (..., m)."""
    x = np.asarray(x, dtype=float)
    p, xt = data.probes, data.actions[:, 0, :]
    vals = cert.u + cert.lam * (x @ p.T - np.sum(p * xt, axis=1))
    out = vals.min(axis=-1)
    return float(out) if out.ndim == 0 else out


def dominance_violations(cert: AfriatCertificate, data: Dataset, tol: float = 1e-6) -> list[tuple[int, int]]:
    """Pairs (t, s), 1-based, where ``x_s`` was affordable at t but ``u_hat(x_s) > u_hat(x_t) + tol``."""
    p, xt = data.probes, data.actions[:, 0, :]
    cost = p @ xt.T
    affordable = cost <= np.diag(cost)[:, None]
    uh = reconstruct_utility(cert, data, xt)
    worse = uh[None, :] > uh[:, None] + tol
    return [(int(t) + 1, int(s) + 1) for t, s in np.argwhere(affordable & worse)]


# ---------------------------------------------------------------- multi-agent


@dataclass(frozen=True)
class PotentialCertificate:
    v: np.ndarray  # (T,)
    lam: np.ndarray  # (n, T), each >= 1

    def max_violation(self, data: Dataset) -> float:
        a = cross_expenditure(data.probes, data.actions)  # (n, T, T)
        lhs = self.v[None, :] - self.v[:, None] - np.einsum("it,its->ts", self.lam, a)
        return float(max(lhs.max(), (1.0 - self.lam).max(), 0.0))


@dataclass(frozen=True)
class NashResult:
    passed: bool
    certificate: PotentialCertificate | None = None

    def __bool__(self) -> bool:
        return self.passed


def potential_system(probes: np.ndarray, actions: np.ndarray, phi: float = 0.0) -> LinearSystem:
    """Rows ``v_s - v_t - sum_i lam_t^i (a[i,t,s] + phi) <= 0`` for t != s.

    Variables are ``[v_1..v_T, lam^1_1..lam^1_T, ..., lam^n_1..lam^n_T]`` with
    ``v >= 0`` (translation invariance) and ``lam >= 1``. ``phi = 0`` gives the
    exact multi-agent Afriat system; ``phi > 0`` is the slackened noisy version.
    """
    T, n, _ = actions.shape
    a = cross_expenditure(probes, actions)
    t_idx, s_idx = np.nonzero(~np.eye(T, dtype=bool))
    rows = np.arange(t_idx.size)
    G = np.zeros((t_idx.size, T + n * T))
    G[rows, s_idx] += 1.0
    G[rows, t_idx] -= 1.0
    for i in range(n):
        G[rows, T + i * T + t_idx] = -(a[i, t_idx, s_idx] + phi)
    lb = np.concatenate([np.zeros(T), np.ones(n * T)])
    return LinearSystem(G, np.zeros(t_idx.size), lb)


def _potential_certificate(point: np.ndarray, T: int, n: int) -> PotentialCertificate:
    return PotentialCertificate(point[:T].copy(), point[T:].reshape(n, T).copy())


def nash_rationality_test(data: Dataset) -> NashResult:
    """Feasibility of the multi-agent Afriat inequalities with ``lam >= 1``."""
    T, n = data.T, data.n
    if T == 1:
        return NashResult(True, PotentialCertificate(np.zeros(1), np.ones((n, 1))))
    res = feasible(potential_system(data.probes, data.actions))
    if not res.feasible:
        return NashResult(False)
    return NashResult(True, _potential_certificate(res.point, T, n))


def _hyperplanes(cert: PotentialCertificate, data: Dataset, point) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    if point.shape[-2:] != (data.n, data.m):
        point = point.reshape(point.shape[:-1] + (data.n, data.m))
    p, x = data.probes, data.actions
    # sum_i lam_t^i p_t'(x^i - x_t^i)
    own = np.einsum("tm,tim->it", p, x)
    at = np.einsum("tm,...im->...it", p, point) - own
    return cert.v + np.einsum("it,...it->...t", cert.lam, at)


def reconstruct_potential(cert: PotentialCertificate, data: Dataset, point) -> np.ndarray | float:
    """``min_t {v_t + sum_i lam_t^i p_t'(x^i - x_t^i)}``; point has shape (..., n, m)."""
    out = _hyperplanes(cert, data, point).min(axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MrsResult:
    value: float
    active: int  # 1-based index of the minimizing hyperplane
    non_unique: bool


def marginal_rate_of_substitution(cert, data: Dataset, point, agent: int = 0,
                                  dims: tuple[int, int] = (0, 1)) -> MrsResult:
    """Ratio of partial derivatives of the reconstructed function at ``point``.

    On the active hyperplane ``t*`` the gradient in agent ``i``'s coordinates
    is ``lam_t*^i p_t*``, so the ratio is ``p_t*(j) / p_t*(k)``. At kinks the
    smallest active index is used and ``non_unique`` is set.
    ``agent`` and ``dims`` are 0-based. Accepts either certificate type.
    """
    if isinstance(cert, AfriatCertificate):
        cert = PotentialCertificate(cert.u, cert.lam[None, :])
    if not 0 <= agent < data.n:
        raise ValueError(f"agent {agent} out of range")
    j, k = dims
    vals = _hyperplanes(cert, data, point)
    if vals.ndim != 1:
        raise ValueError("MRS is evaluated at a single point")
    best = vals.min()
    active = np.flatnonzero(vals <= best + KINK_TOL * max(1.0, abs(best)))
    t = int(active[0])
    p = data.probes[t]
    return MrsResult(float(p[j] / p[k]), t + 1, bool(active.size > 1))


def pgarp_condition_a(data: Dataset) -> list[GarpResult]:
    """Per-agent GARP on the whole series; necessary for Nash rationality.

    GARP on the full series implies it on every prefix, so one check per
    agent covers all prefix datasets. The remaining PGARP condition (that
    the responses come from a concave potential game) is not observable.
    """
    return [garp_check(data.agent(i)) for i in range(data.n)]


__all__ = [
    "AfriatCertificate",
    "AfriatResult",
    "Dataset",
    "DatasetError",
    "FEAS_TOL",
    "GarpResult",
    "MrsResult",
    "NashResult",
    "PotentialCertificate",
    "afriat_system",
    "afriat_test",
    "cross_expenditure",
    "dominance_violations",
    "garp_check",
    "marginal_rate_of_substitution",
    "nash_rationality_test",
    "pgarp_condition_a",
    "potential_system",
    "reconstruct_potential",
    "reconstruct_utility",
]

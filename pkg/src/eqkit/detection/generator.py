"""Synthetic data for the malicious-agent detection study.

Nash-rational data: for each probe, the agents' joint response maximises
``V = sum_i u^i`` under per-agent budgets, with

    u^i = ln[x^i(1) x^i(2) / (S(1) S(2))] + sum_j ln(1 + x^i(j) / beta(j)),

where ``S(j)`` sums good ``j`` over agents. Normal (non-strategic) agents
respond with uniform random actions that ignore the probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..revealed import Dataset

X_FLOOR = 1e-6
GRAD_TOL = 1e-9
FAIL_TOL = 1e-5
MAX_ITERS = 50_000


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


@dataclass(frozen=True)
class MaliciousGameSpec:
    num_agents: int = 3
    num_goods: int = 2
    beta: tuple = (0.03, 0.08)
    budget_means: tuple = (20.0, 50.0, 80.0)
    budget_variances: tuple = (1.0, 1.0, 4.0)
    probe_low: float = 1.0
    probe_high: float = 5.0
    normal_low: float = 1.0
    normal_high: float = 50.0

    def __post_init__(self):
        n, m = self.num_agents, self.num_goods
        if n < 1 or m < 1:
            raise ValueError("need at least one agent and one good")
        if n > 1 and m != 2:
            raise ValueError("the interaction term is defined for two goods only")
        for name, size in (("beta", m), ("budget_means", n), ("budget_variances", n)):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != size:
                raise ValueError(f"{name} needs {size} entries, got {len(value)}")
            object.__setattr__(self, name, value)
        if min(self.beta) <= 0:
            raise ValueError("beta entries must be positive")
        if min(self.budget_means) <= 0:
            raise ValueError("budget means must be positive")
        if min(self.budget_variances) < 0:
            raise ValueError("budget variances must be nonnegative")
        if not 0 < self.probe_low < self.probe_high:
            raise ValueError("probe bounds must satisfy 0 < low < high")
        if not 0 <= self.normal_low < self.normal_high:
            raise ValueError("normal-agent bounds must satisfy 0 <= low < high")

    @classmethod
    def from_dict(cls, d: dict) -> "MaliciousGameSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "num_agents": self.num_agents,
            "num_goods": self.num_goods,
            "beta": list(self.beta),
            "budget_means": list(self.budget_means),
            "budget_variances": list(self.budget_variances),
            "probe_low": self.probe_low,
            "probe_high": self.probe_high,
            "normal_low": self.normal_low,
            "normal_high": self.normal_high,
        }

    def draw_probes(self, T: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.probe_low, self.probe_high, size=(T, self.num_goods))

    def draw_budgets(self, T: int, rng: np.random.Generator) -> np.ndarray:
        """(T, n) budgets; nonpositive draws are redrawn."""
        mean = np.array(self.budget_means)
        sd = np.sqrt(np.array(self.budget_variances))
        out = rng.normal(mean, sd, size=(T, self.num_agents))
        bad = out <= 0.0
        while bad.any():
            out[bad] = rng.normal(np.broadcast_to(mean, out.shape)[bad], np.broadcast_to(sd, out.shape)[bad])
            bad = out <= 0.0
        return out


def malicious_utility(x_i, x_others, beta) -> float:
    """Utility of one agent given its action and the others' actions.

    ``x_others`` has shape (n-1, m) and may be empty.
    """
    x_i = np.asarray(x_i, dtype=float)
    others = np.asarray(x_others, dtype=float).reshape(-1, x_i.size)
    beta = np.asarray(beta, dtype=float)
    if np.any(x_i <= 0) or np.any(others <= 0):
        raise ValueError("actions must be strictly positive in the log domain")
    s = float(np.sum(np.log1p(x_i / beta)))
    if others.shape[0] == 0:
        return s
    if x_i.size != 2:
        raise ValueError("the interaction term is defined for two goods only")
    S = x_i + others.sum(axis=0)
    r = float(np.log(x_i[0] * x_i[1]) - np.log(S[0] * S[1]))
    return r + s


def potential(X: np.ndarray, beta) -> np.ndarray:
    """``V = sum_i u^i`` for joint actions X of shape (..., n, m)."""
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = X.shape[-2]
    s = np.log1p(X / beta).sum(axis=(-2, -1))
    if n == 1:
        return s
    S = X.sum(axis=-2)
    r = np.log(X).sum(axis=(-2, -1)) - n * np.log(S).sum(axis=-1)
    return r + s


def potential_gradient(X: np.ndarray, beta) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    g = 1.0 / (beta + X)
    n = X.shape[-2]
    if n > 1:
        S = X.sum(axis=-2, keepdims=True)
        g = g + 1.0 / X - n / S
    return g


def project_budget(Y: np.ndarray, P: np.ndarray, I: np.ndarray, floor: float = X_FLOOR) -> np.ndarray:
    """Euclidean projection of each row of Y onto ``{x >= floor, P'x <= I}``.

    Rows of shape (B, m). The multiplier ``theta`` solves the piecewise
    linear equation ``sum_j P_j max(Y_j - theta P_j, floor) = I``, found
    exactly by scanning breakpoints.
    """
    Y = np.asarray(Y, dtype=float)
    X = np.maximum(Y, floor)
    over = np.einsum("bm,bm->b", P, X) > I
    if not over.any():
        return X
    y, p, b = Y[over], P[over], I[over]
    if np.any(b <= floor * p.sum(axis=1)):
        raise ValueError("budget too small to afford the action floor")
    brk = np.maximum((y - floor) / p, 0.0)
    pts = np.sort(np.concatenate([np.zeros((y.shape[0], 1)), brk], axis=1), axis=1)
    vals = np.einsum("bj,bkj->bk", p, np.maximum(y[:, None, :] - pts[:, :, None] * p[:, None, :], floor))
    k = np.argmax(vals <= b[:, None], axis=1)  # first breakpoint at or under budget
    rows = np.arange(y.shape[0])
    lo, hi = pts[rows, k - 1], pts[rows, k]
    glo, ghi = vals[rows, k - 1], vals[rows, k]
    theta = lo + (glo - b) / (glo - ghi) * (hi - lo)
    X[over] = np.maximum(y - theta[:, None] * p, floor)
    return X


@dataclass
class SolverReport:
    iterations: int
    residual: np.ndarray = field(repr=False)


def maximize_potential(probes: np.ndarray, budgets: np.ndarray, beta, *,
                       tol: float = GRAD_TOL, max_iters: int = MAX_ITERS,
                       return_report: bool = False):
    """Joint responses maximising the potential for every probe at once.

    Projected gradient ascent with Barzilai-Borwein steps and Armijo
    backtracking, batched over observations. Starts from the even split
    ``x^i(j) = I^i / (m p(j))``. Raises :class:`ConvergenceError` with an
    iterate dump if the projected-gradient residual is still above 1e-5 at
    the cap.
    """
    P = np.asarray(probes, dtype=float)
    I = np.asarray(budgets, dtype=float)
    T, m = P.shape
    n = I.shape[1]
    Pb = np.broadcast_to(P[:, None, :], (T, n, m)).reshape(T * n, m)
    Ib = I.reshape(T * n)

    def proj(Y):
        return project_budget(Y.reshape(T * n, m), Pb, Ib).reshape(T, n, m)

    X = I[:, :, None] / (m * P[:, None, :])
    X = proj(X)
    V = potential(X, beta)
    G = potential_gradient(X, beta)
    alpha = np.full(T, 1.0)
    residual = np.abs(proj(X + G) - X).max(axis=(1, 2))
    it = 0
    while it < max_iters and residual.max() > tol:
        it += 1
        active = residual > tol
        step = alpha.copy()
        Xn, Vn = X.copy(), V.copy()
        pending = active.copy()
        for _ in range(60):
            Xc = proj(X + step[:, None, None] * G)
            Vc = potential(Xc, beta)
            gain = np.einsum("tnm,tnm->t", G, Xc - X)
            ok = pending & (Vc >= V + 1e-4 * gain - 1e-13 * np.abs(V))
            Xn[ok], Vn[ok] = Xc[ok], Vc[ok]
            pending &= ~ok
            if not pending.any():
                break
            step[pending] *= 0.5
        Gn = potential_gradient(Xn, beta)
        s = (Xn - X).reshape(T, -1)
        yv = (G - Gn).reshape(T, -1)  # ascent: curvature of -V
        sy = np.einsum("tk,tk->t", s, yv)
        ss = np.einsum("tk,tk->t", s, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            bb = np.where(sy > 0, ss / sy, 1e4)
        alpha = np.where(active, np.clip(bb, 1e-8, 1e4), alpha)
        X, V, G = Xn, Vn, Gn
        residual = np.abs(proj(X + G) - X).max(axis=(1, 2))
    if residual.max() > FAIL_TOL:
        worst = int(np.argmax(residual))
        dump = {
            "observation": worst,
            "residual": float(residual[worst]),
            "probe": P[worst].tolist(),
            "budgets": I[worst].tolist(),
            "iterate": X[worst].tolist(),
            "gradient": G[worst].tolist(),
            "iterations": it,
        }
        raise ConvergenceError(f"projected gradient did not converge (residual {residual[worst]:.3e})", dump)
    if return_report:
        return X, SolverReport(it, residual)
    return X


def water_filling(p, budget: float, beta) -> np.ndarray:
    """Closed-form maximiser of ``sum_j ln(1 + x_j / beta_j)`` on ``p'x <= budget, x >= 0``.

    KKT gives ``x_j = max(0, 1/(theta p_j) - beta_j)``; the level ``1/theta``
    is found by scanning the sorted activation thresholds ``beta_j p_j``.
    """
    p = np.asarray(p, dtype=float)
    beta = np.asarray(beta, dtype=float)
    thresholds = beta * p
    order = np.argsort(thresholds)
    level = 0.0
    for k in range(1, p.size + 1):
        act = order[:k]
        # spend = sum_{act} (level - beta_j p_j) = budget
        level = (budget + thresholds[act].sum()) / k
        if k == p.size or level <= thresholds[order[k]]:
            break
    return np.maximum(level / p - beta, 0.0)


def generate_potential_game_data(spec: MaliciousGameSpec, T: int, rng: np.random.Generator,
                                 probes: np.ndarray | None = None) -> Dataset:
    """Nash-rational dataset: per-probe maximisers of the potential."""
    if probes is None:
        probes = spec.draw_probes(T, rng)
    probes = np.asarray(probes, dtype=float)
    if probes.shape != (T, spec.num_goods):
        raise ValueError(f"probes must have shape {(T, spec.num_goods)}")
    budgets = spec.draw_budgets(T, rng)
    X = maximize_potential(probes, budgets, spec.beta)
    return Dataset(probes, X)


def generate_normal_agent_data(spec: MaliciousGameSpec, probes: np.ndarray,
                               rng: np.random.Generator) -> Dataset:
    """Non-strategic responses: i.i.d. uniform actions, independent of the probe."""
    probes = np.asarray(probes, dtype=float)
    T = probes.shape[0]
    X = rng.uniform(spec.normal_low, spec.normal_high, size=(T, spec.num_agents, spec.num_goods))
    return Dataset(probes, X)

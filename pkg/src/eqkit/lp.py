"""Dense phase-one simplex for linear feasibility problems.

Every inequality system in the package (Afriat, multi-agent Afriat, the
slackened system behind the test statistic) is checked here. Systems are
posed as ``G x <= h`` with optional per-variable lower bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
MAX_PIVOTS = 1_000_000
# consecutive degenerate pivots before switching to lexicographic ties for good
_DEGENERATE_STREAK = 50


class LPError(RuntimeError):
    """Solver failure that is not a verdict (pivot cap, numerical breakdown)."""


@dataclass(frozen=True)
class LinearSystem:
    """Constraints ``G @ x <= h`` with ``x >= lower_bounds``.

    ``lower_bounds`` entries may be ``-inf`` (free variable); ``None`` means
    every variable is free.
    """

    G: np.ndarray
    h: np.ndarray
    lower_bounds: np.ndarray | None = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if G.shape[0] != h.shape[0]:
            raise ValueError(f"G has {G.shape[0]} rows but h has {h.shape[0]} entries")
        if self.lower_bounds is None:
            lb = np.full(G.shape[1], -np.inf)
        else:
            lb = np.asarray(self.lower_bounds, dtype=float).reshape(-1)
            if lb.shape[0] != G.shape[1]:
                raise ValueError(
                    f"G has {G.shape[1]} columns but lower_bounds has {lb.shape[0]} entries"
                )
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise ValueError("G and h must be finite")
        if np.any(np.isnan(lb)) or np.any(lb == np.inf):
            raise ValueError("lower bounds must be finite or -inf")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "lower_bounds", lb)

    @property
    def num_constraints(self) -> int:
        return self.G.shape[0]

    @property
    def num_variables(self) -> int:
        return self.G.shape[1]

    def max_violation(self, x: np.ndarray) -> float:
        """Largest amount by which ``x`` breaks a constraint or bound (0 if none)."""
        x = np.asarray(x, dtype=float)
        viol = 0.0
        if self.num_constraints:
            viol = max(viol, float(np.max(self.G @ x - self.h)))
        lb = self.lower_bounds
        finite = np.isfinite(lb)
        if np.any(finite):
            viol = max(viol, float(np.max(lb[finite] - x[finite])))
        return max(viol, 0.0)


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    point: np.ndarray | None = None
    pivots: int = 0
    infeasibility: float = 0.0  # optimal phase-one objective
    notes: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.feasible


def _standardize(system: LinearSystem):
    """Rewrite as ``A y <= b, y >= 0``; return (A, b, recover) with recover(y) -> x."""
    G, h, lb = system.G, system.h, system.lower_bounds
    finite = np.isfinite(lb)
    shift = np.where(finite, lb, 0.0)
    b = h - G @ shift
    free = np.flatnonzero(~finite)
    A = np.hstack([G, -G[:, free]]) if free.size else G
    n = G.shape[1]

    def recover(y):
        x = y[:n] + shift
        if free.size:
            x[free] -= y[n:]
        return x

    return A, b, recover


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    # tab is C-ordered, so tab.T is a Fortran view BLAS can update in place
    prow = tab[row] / tab[row, col]
    colv = tab[:, col].copy()
    colv[row] = 0.0
    dger(-1.0, prow, colv, a=tab.T, overwrite_a=1)
    tab[row] = prow
    # pivot column is exactly a unit vector after elimination
    tab[:, col] = 0.0
    tab[row, col] = 1.0


def _lex_min_row(tab, ties, colv, ref_cols, tol):
    """Tied row whose ``ref_cols`` entries over the pivot entry are lexicographically least."""
    sub = tab[np.ix_(ties, ref_cols)] / colv[ties, None]
    best = 0
    for k in range(1, ties.size):
        # the first column where challenger and incumbent differ decides
        diff = sub[k] - sub[best]
        first = int(np.argmax(np.abs(diff) > tol))
        if diff[first] < -tol:
            best = k
    return int(ties[best])


def feasible(
    system: LinearSystem,
    *,
    pivot_tol: float = PIVOT_TOL,
    feas_tol: float = FEAS_TOL,
    max_pivots: int = MAX_PIVOTS,
) -> FeasibilityResult:
    """Decide whether ``system`` has a solution.

    Phase one uses a single artificial column ``x0`` (``A y - x0 <= b``,
    minimise ``x0``), so only one pivot is needed to reach a feasible basis.
    Pricing is Dantzig's most-negative reduced cost throughout. Ratio-test
    ties go to the largest pivot element until a run of degenerate pivots is
    seen; from then on they are broken lexicographically against the columns
    of the variables basic at that moment. Those columns start as an identity
    block over a nonnegative right-hand side, so every row is lex-positive,
    the rule keeps it so, and no basis can repeat.
    """
    if not isinstance(system, LinearSystem):
        raise TypeError("expected a LinearSystem")
    A, b, recover = _standardize(system)
    m, ns = A.shape
    if m == 0 or np.all(b >= 0.0):
        x = recover(np.zeros(ns))
        return FeasibilityResult(True, x, 0, 0.0)

    # Scale rows to unit max-norm; verdicts are invariant and pivots are tamer.
    scale = np.maximum(np.max(np.abs(A), axis=1), np.abs(b))
    scale[scale == 0.0] = 1.0
    A = A / scale[:, None]
    b = b / scale

    ncol = ns + m + 1
    x0 = ns + m
    tab = np.zeros((m + 1, ncol + 1))
    tab[:m, :ns] = A
    tab[:m, ns : ns + m] = np.eye(m)
    tab[:m, x0] = -1.0
    tab[:m, -1] = b
    tab[m, x0] = 1.0  # reduced costs for min x0
    basis = np.arange(ns, ns + m)

    r0 = int(np.argmin(b))
    _pivot(tab, r0, x0)
    basis[r0] = x0
    pivots = 1
    lex_cols = None
    degenerate = 0

    while True:
        d = tab[m, :ncol]
        col = int(np.argmin(d))
        if d[col] >= -pivot_tol:
            break
        colv = tab[:m, col]
        rows = np.flatnonzero(colv > pivot_tol)
        if rows.size == 0:
            # cannot happen for a phase-one problem bounded below by 0
            raise LPError(f"phase one reported unbounded at pivot {pivots}")
        ratios = np.maximum(tab[rows, -1], 0.0) / colv[rows]
        best = ratios.min()
        if best <= pivot_tol:
            degenerate += 1
            if lex_cols is None and degenerate >= _DEGENERATE_STREAK:
                lex_cols = basis.copy()
        else:
            degenerate = 0
        ties = rows[ratios <= best + pivot_tol * max(1.0, abs(best))]
        if ties.size == 1:
            row = int(ties[0])
        elif np.any(basis[ties] == x0):
            row = int(ties[basis[ties] == x0][0])
        elif lex_cols is not None:
            row = _lex_min_row(tab, ties, colv, lex_cols, pivot_tol)
        else:
            # largest pivot element among tied rows keeps growth down
            row = int(ties[np.argmax(colv[ties])])
        leaving = basis[row]
        _pivot(tab, row, col)
        basis[row] = col
        pivots += 1
        if leaving == x0:
            # x0 is nonbasic, hence 0: the current basis is feasible
            break
        if pivots >= max_pivots:
            raise LPError(f"pivot cap of {max_pivots} reached without a verdict")

    y = np.zeros(ncol)
    y[basis] = np.maximum(tab[:m, -1], 0.0)
    infeas = float(y[x0])
    if infeas > feas_tol:
        return FeasibilityResult(False, None, pivots, infeas)
    x = recover(y[:ns])
    return FeasibilityResult(True, x, pivots, infeas)

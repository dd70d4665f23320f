"""File formats: dataset CSV, game and graph JSON, learning traces.

Floats are written with ``repr`` so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .game import ConnectivityGraph, NormalFormGame, index_profile
from .revealed import Dataset, DatasetError


class ParseError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


def dataset_header(n: int, m: int) -> list[str]:
    return ["t"] + [f"p_{j}" for j in range(1, m + 1)] + [
        f"x_{i}_{j}" for i in range(1, n + 1) for j in range(1, m + 1)
    ]


def write_dataset_csv(path, probes, actions) -> None:
    """Write probes (T, m) and actions (T, n, m) under the standard header."""
    probes = np.asarray(probes, dtype=float)
    actions = np.asarray(actions, dtype=float)
    if actions.ndim == 2:
        actions = actions[:, None, :]
    T, m = probes.shape
    n = actions.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset_header(n, m))
        for t in range(T):
            w.writerow([t + 1] + [repr(float(v)) for v in probes[t]] + [repr(float(v)) for v in actions[t].ravel()])


def _parse_header(header: list[str], row: int) -> tuple[int, int]:
    cols = [h.strip() for h in header]
    if not cols or cols[0] != "t":
        raise ParseError("header must start with 't'", row)
    m = 0
    while 1 + m < len(cols) and re.fullmatch(r"p_\d+", cols[1 + m]):
        m += 1
    if m == 0:
        raise ParseError("header has no probe columns p_1..p_m", row)
    rest = len(cols) - 1 - m
    if rest == 0 or rest % m:
        raise ParseError(f"{rest} action columns is not a multiple of m = {m}", row)
    n = rest // m
    if cols != dataset_header(n, m):
        raise ParseError(f"header does not match the expected layout {dataset_header(n, m)}", row)
    return n, m


def read_observations_csv(path, agents: int | None = None,
                          nonnegative: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Parse the CSV into raw arrays with probes checked positive.

    Noisy observations may be negative, so action signs are only checked
    when ``nonnegative`` is set.

    Row numbers in errors count the header as row 1.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    rows_numbered = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows_numbered:
        raise ParseError("T ≥ 1 required (file is empty)")
    hdr_row, header = rows_numbered[0]
    n, m = _parse_header(header, hdr_row)
    if agents is not None and agents != n:
        raise ParseError(f"header describes {n} agents but {agents} were requested", hdr_row)
    body = rows_numbered[1:]
    if not body:
        raise ParseError("T ≥ 1 required")
    P = np.empty((len(body), m))
    X = np.empty((len(body), n, m))
    for k, (rownum, r) in enumerate(body):
        if len(r) != 1 + m + n * m:
            raise ParseError(f"expected {1 + m + n * m} fields, got {len(r)}", rownum)
        try:
            vals = [float(c) for c in r[1:]]
            t = int(r[0])
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", rownum) from None
        if t != k + 1:
            raise ParseError(f"time index {t} out of sequence (expected {k + 1})", rownum)
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite value", rownum)
        P[k] = vals[:m]
        X[k] = np.reshape(vals[m:], (n, m))
        if np.any(P[k] <= 0):
            raise ParseError("probe entries must be strictly positive", rownum)
        if nonnegative and np.any(X[k] < 0):
            raise ParseError("actions must be nonnegative", rownum)
    return P, X


def read_dataset_csv(path, agents: int | None = None) -> Dataset:
    """Parse a clean dataset; actions must be nonnegative."""
    P, X = read_observations_csv(path, agents, nonnegative=True)
    try:
        return Dataset(P, X)
    except DatasetError as exc:
        raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------- games


def game_to_dict(game: NormalFormGame) -> dict:
    K, A = game.num_agents, game.num_actions
    flat = game.flat_payoffs()
    return {
        "num_agents": K,
        "num_actions": A,
        "payoffs": [[list(index_profile(i, K, A)), flat[i].tolist()] for i in range(A**K)],
        "symmetric": bool(game.symmetric),
    }


def game_from_dict(d: dict) -> NormalFormGame:
    for key in ("num_agents", "num_actions", "payoffs"):
        if key not in d:
            raise ParseError(f"game file lacks '{key}'")
    entries = []
    for k, item in enumerate(d["payoffs"]):
        if not (isinstance(item, (list, tuple)) and len(item) == 2):
            raise ParseError(f"payoff entry {k} must be [profile, utilities]")
        entries.append((tuple(item[0]), item[1]))
    return NormalFormGame.from_profiles(int(d["num_agents"]), int(d["num_actions"]), entries,
                                        symmetric=bool(d.get("symmetric", False)))


def load_game(path) -> NormalFormGame:
    return game_from_dict(json.loads(Path(path).read_text()))


def save_game(path, game: NormalFormGame) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=2) + "\n")


def graph_from_dict(d: dict) -> tuple[ConnectivityGraph, np.ndarray | None]:
    """Graph JSON: ``{"num_agents": K, "edges": [[k, l], ...], "C": optional K x K}``."""
    if "num_agents" not in d:
        raise ParseError("graph file lacks 'num_agents'")
    graph = ConnectivityGraph(int(d["num_agents"]), [tuple(e) for e in d.get("edges", [])])
    C = d.get("C")
    return graph, (None if C is None else np.asarray(C, dtype=float))


def load_graph(path) -> tuple[ConnectivityGraph, np.ndarray | None]:
    return graph_from_dict(json.loads(Path(path).read_text()))


def graph_to_dict(graph: ConnectivityGraph, C=None) -> dict:
    d = {"num_agents": graph.num_agents, "edges": sorted([list(e) for e in graph.edges])}
    if C is not None:
        d["C"] = np.asarray(C, dtype=float).tolist()
    return d


# ---------------------------------------------------------------- traces


def write_trace_csv(path, mean_d, std_d, extra: dict | None = None) -> None:
    """Learning trace with columns ``n, mean_d_n, std_d_n`` (plus any extras)."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "mean_d_n", "std_d_n"] + list(extra))
        for i in range(len(mean_d)):
            w.writerow([i + 1, repr(float(mean_d[i])), repr(float(std_d[i]))]
                       + [repr(float(v[i])) for v in extra.values()])


def write_probes_csv(path, probes) -> None:
    probes = np.asarray(probes, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"p_{j}" for j in range(1, probes.shape[1] + 1)])
        for t, row in enumerate(probes):
            w.writerow([t + 1] + [repr(float(v)) for v in row])


def dumps_json(obj) -> str:
    """Stable JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"

"""Seeded experiment runs driven by JSON configs.

Every run writes its artefacts plus ``summary.json`` into its own output
directory. The summary repeats the seed and every parameter so it alone is
enough to reproduce the run; it carries no timestamps, so reruns are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .detection import (
    MaliciousGameSpec,
    NoiseModel,
    NoisyDataset,
    SpsaConfig,
    optimize_probes,
    statistical_test,
    type1_rate,
    type2_rate,
)
from .detection.statistic import DEFAULT_MC
from .game import ce_epsilon_violation
from .learning import LearnerConfig, run_simulation
from .revealed import afriat_test, garp_check, nash_rationality_test
from .rng import MONTE_CARLO, stream

KINDS = ("learning", "afriat", "nash", "stat-test", "spsa")


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    inputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        for name, path in self.inputs.items():
            if not Path(path).exists():
                raise ExperimentError(f"input '{name}' not found: {path}")

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentConfig":
        """Relative input paths resolve against ``base`` (the config's folder)."""
        unknown = set(d) - {"kind", "seed", "inputs", "params", "output"}
        if unknown:
            raise ExperimentError(f"unknown config keys {sorted(unknown)}")
        base = base or Path.cwd()
        inputs = {k: str((base / v) if not Path(v).is_absolute() else Path(v)) for k, v in d.get("inputs", {}).items()}
        return cls(d["kind"], int(d.get("seed", 0)), inputs, dict(d.get("params", {})), d.get("output"))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path.parent)


def bundled_config(name: str) -> Path:
    """Path of a config shipped inside the package (e.g. ``table1-learning.json``)."""
    return Path(str(resources.files("eqkit") / "configs" / name))


def _float_list(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


def _run_learning(cfg: ExperimentConfig, out: Path) -> dict:
    game = io.load_game(cfg.inputs["game"])
    graph, C = io.load_graph(cfg.inputs["graph"]) if "graph" in cfg.inputs else (None, None)
    p = cfg.params
    eps, delta = float(p.get("eps", 0.01)), float(p.get("delta", 0.15))
    horizon, runs = int(p.get("horizon", 5000)), int(p.get("runs", 100))
    variants = list(p.get("variants", ["diffusion", "isolated"]))
    fuse_source = p.get("fuse_source", "individual")
    checkpoints = [int(n) for n in p.get("checkpoints", range(500, horizon + 1, 500)) if n <= horizon]
    lcfg = LearnerConfig.for_game(game, eps, delta, p.get("inertia"), cfg.seed)
    traces = {
        v: run_simulation(game, graph, C, lcfg, horizon, runs, v, fuse_source=fuse_source, checkpoints=checkpoints)
        for v in variants
    }
    first = traces[variants[0]]
    extra = {}
    for v in variants[1:]:
        extra[f"{v}_mean_d_n"] = traces[v].mean_d
        extra[f"{v}_std_d_n"] = traces[v].std_d
    io.write_trace_csv(out / "trace.csv", first.mean_d, first.std_d, extra)
    summary = {
        "variant_in_main_columns": variants[0],
        "inertia": lcfg.inertia,
        "checkpoints": checkpoints,
        "mean_d": {v: {str(n): tr.at(n) for n in [1, min(50, horizon)] + checkpoints} for v, tr in traces.items()},
        "median_ce_violation": {
            v: {str(n): float(np.median([ce_epsilon_violation(game, z) for z in tr.z_at[n]])) for n in checkpoints}
            for v, tr in traces.items()
        },
    }
    if {"diffusion", "isolated"} <= set(traces):
        dif, iso = traces["diffusion"], traces["isolated"]
        wins = [dif.at(n) <= iso.at(n) for n in checkpoints]
        summary["diffusion_not_worse_fraction"] = float(np.mean(wins)) if wins else None
    return summary


def _run_afriat(cfg: ExperimentConfig, out: Path) -> dict:
    data = io.read_dataset_csv(cfg.inputs["data"], agents=1)
    res = afriat_test(data)
    garp = garp_check(data)
    summary = {"T": data.T, "m": data.m, "afriat": "Pass" if res else "Fail",
               "garp": "Pass" if garp else "Fail", "garp_cycle": list(garp.cycle)}
    if res:
        summary["certificate"] = {"u": _float_list(res.certificate.u), "lambda": _float_list(res.certificate.lam)}
    summary["passed"] = bool(res)
    return summary


def _run_nash(cfg: ExperimentConfig, out: Path) -> dict:
    agents = cfg.params.get("agents")
    data = io.read_dataset_csv(cfg.inputs["data"], agents=None if agents is None else int(agents))
    res = nash_rationality_test(data)
    summary = {"T": data.T, "m": data.m, "n": data.n, "nash_rationality": "Pass" if res else "Fail"}
    if res:
        summary["certificate"] = {"v": _float_list(res.certificate.v),
                                  "lambda": res.certificate.lam.tolist()}
    summary["passed"] = bool(res)
    return summary


def _spec(cfg: ExperimentConfig) -> MaliciousGameSpec:
    if "spec" in cfg.inputs:
        return MaliciousGameSpec.from_dict(json.loads(Path(cfg.inputs["spec"]).read_text()))
    return MaliciousGameSpec.from_dict(cfg.params.get("spec", {}))


def _read_probes(path) -> np.ndarray:
    rows = np.genfromtxt(path, delimiter=",", names=True)
    cols = [c for c in rows.dtype.names if c.startswith("p_")]
    return np.column_stack([np.atleast_1d(rows[c]) for c in cols])


def _run_stat_test(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    gamma = float(p.get("gamma", 0.05))
    noise = NoiseModel.parse(p.get("noise", "uniform:0.1"))
    mc = int(p.get("mc", DEFAULT_MC))
    if "data" in cfg.inputs:
        P, Y = io.read_observations_csv(cfg.inputs["data"], p.get("agents"))
        outcome = statistical_test(NoisyDataset(P, Y, noise), gamma, mc, stream(cfg.seed, MONTE_CARLO))
        summary = outcome.to_dict()
        summary["passed"] = outcome.accepted
        return summary
    # Monte Carlo error rates on synthetic data
    spec = _spec(cfg)
    T = int(p.get("T", 20))
    reps = int(p.get("repetitions", 1000))
    probes = _read_probes(cfg.inputs["probes"]) if "probes" in cfg.inputs else None
    kw = dict(probes=probes, mc_samples=mc, workers=p.get("workers"))
    t1, _ = type1_rate(reps, spec, noise, T, gamma, cfg.seed, **kw)
    summary = {"spec": spec.to_dict(), "type_I": t1.to_dict(),
               "probes": "fixed" if probes is not None else "random per repetition"}
    if probes is not None or p.get("type_II_random_probes", True):
        t2, _ = type2_rate(reps, spec, noise, T, gamma, cfg.seed, **kw)
        summary["type_II"] = t2.to_dict()
    summary["passed"] = bool(t1.rate <= gamma + 2 * np.sqrt(gamma * (1 - gamma) / reps))
    return summary


def _run_spsa(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    spec = _spec(cfg)
    noise = NoiseModel.parse(p.get("noise", "uniform:0.1"))
    scfg = SpsaConfig(float(p.get("sigma", 0.1)), float(p.get("step", 0.2)), int(p.get("iterations", 300)),
                      int(p.get("cost_samples", 100)), cfg.seed)
    T = int(p.get("T", 20))
    gamma = float(p.get("gamma", 0.05))
    trace = optimize_probes(spec, noise, scfg, T, gamma, int(p.get("mc", DEFAULT_MC)))
    io.write_probes_csv(out / "probes.csv", trace.final_probes)
    with open(out / "costs.csv", "w") as fh:
        fh.write("q,cost,cost_plus,cost_minus\n")
        for q, (c, a, b) in enumerate(zip(trace.costs, trace.cost_plus, trace.cost_minus)):
            fh.write(f"{q + 1},{c!r},{a!r},{b!r}\n")
    Q = len(trace.costs)
    tail = trace.costs[-max(1, Q // 10):] if Q else np.array([np.nan])
    return {
        "spec": spec.to_dict(),
        "first_cost": float(trace.costs[0]) if Q else None,
        "final_window_mean_cost": float(tail.mean()) if Q else None,
        "final_probes": trace.final_probes.tolist(),
    }


def _describe_input(path: str) -> dict:
    """JSON inputs are embedded verbatim; other files are pinned by digest."""
    raw = Path(path).read_bytes()
    if path.endswith(".json"):
        return {"file": Path(path).name, "content": json.loads(raw)}
    return {"file": Path(path).name, "sha256": hashlib.sha256(raw).hexdigest()}


_RUNNERS = {
    "learning": _run_learning,
    "afriat": _run_afriat,
    "nash": _run_nash,
    "stat-test": _run_stat_test,
    "spsa": _run_spsa,
}


def run_experiment(cfg: ExperimentConfig, output: str | Path | None = None) -> dict:
    """Run one experiment, write artefacts and ``summary.json``, return the summary."""
    out = Path(output or cfg.output or f"eqkit-{cfg.kind}")
    out.mkdir(parents=True, exist_ok=True)
    result = _RUNNERS[cfg.kind](cfg, out)
    summary = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "params": cfg.params,
        "inputs": {k: _describe_input(v) for k, v in cfg.inputs.items()},
        "result": result,
    }
    (out / "summary.json").write_text(io.dumps_json(summary))
    return summary

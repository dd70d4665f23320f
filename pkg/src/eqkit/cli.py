"""Command-line entry point ``eqkit``.

Exit codes: 0 when a test passes (or a run completes), 1 when a test
fails, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .detection import (
    MaliciousGameSpec,
    NoiseModel,
    NoisyDataset,
    SpsaConfig,
    generate_normal_agent_data,
    generate_potential_game_data,
    optimize_probes,
    statistical_test,
)
from .detection.statistic import DEFAULT_MC
from .experiments import ExperimentConfig, run_experiment
from .learning import LearnerConfig, run_simulation
from .revealed import afriat_test, garp_check, nash_rationality_test
from .rng import DATA, MONTE_CARLO, NOISE, stream


def _emit(obj, out: str | None) -> None:
    text = io.dumps_json(obj)
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def cmd_simulate_learning(a) -> int:
    game = io.load_game(a.game)
    graph, C = io.load_graph(a.graph) if a.graph else (None, None)
    cfg = LearnerConfig.for_game(game, a.eps, a.delta, a.inertia, a.seed)
    tr = run_simulation(game, graph, C, cfg, a.horizon, a.runs, a.variant, fuse_source=a.fuse_source)
    io.write_trace_csv(a.out, tr.mean_d, tr.std_d)
    print(f"wrote {a.out}: mean d_n {tr.at(1):.4g} at n=1, {tr.at(a.horizon):.4g} at n={a.horizon}")
    return 0


def cmd_test_afriat(a) -> int:
    data = io.read_dataset_csv(a.data, agents=1)
    res = afriat_test(data)
    garp = garp_check(data)
    out = {"verdict": "Pass" if res else "Fail", "garp": "Pass" if garp else "Fail"}
    if res:
        out["certificate"] = {"u": res.certificate.u.tolist(), "lambda": res.certificate.lam.tolist()}
    else:
        out["garp_cycle"] = list(garp.cycle)
    _emit(out, a.out)
    return 0 if res else 1


def cmd_test_nash(a) -> int:
    data = io.read_dataset_csv(a.data, agents=a.agents)
    res = nash_rationality_test(data)
    out = {"verdict": "Pass" if res else "Fail"}
    if res:
        out["certificate"] = {"v": res.certificate.v.tolist(), "lambda": res.certificate.lam.tolist()}
    _emit(out, a.out)
    return 0 if res else 1


def cmd_stat_test(a) -> int:
    P, Y = io.read_observations_csv(a.data, a.agents)
    noise = NoiseModel.parse(a.noise)
    outcome = statistical_test(NoisyDataset(P, Y, noise), a.gamma, a.mc, stream(a.seed, MONTE_CARLO))
    _emit(outcome.to_dict(), a.out)
    return 0 if outcome.accepted else 1


def _load_spec(path) -> MaliciousGameSpec:
    return MaliciousGameSpec.from_dict(json.loads(Path(path).read_text()))


def cmd_optimize_probe(a) -> int:
    spec = _load_spec(a.spec)
    cfg = SpsaConfig(a.sigma, a.step, a.iters, a.cost_samples, a.seed)
    trace = optimize_probes(spec, NoiseModel.parse(a.noise), cfg, a.T, a.gamma, a.mc)
    io.write_probes_csv(a.out, trace.final_probes)
    if len(trace.costs):
        tail = trace.costs[-max(1, len(trace.costs) // 10):].mean()
        print(f"wrote {a.out}: cost {trace.costs[0]:.3f} at first iteration, {tail:.3f} over the last 10%")
    return 0


def cmd_gen_data(a) -> int:
    spec = _load_spec(a.spec)
    rng = stream(a.seed, DATA)
    if a.normal:
        data = generate_normal_agent_data(spec, spec.draw_probes(a.T, rng), rng)
    else:
        data = generate_potential_game_data(spec, a.T, rng)
    actions = data.actions
    if a.noise:
        actions = actions + NoiseModel.parse(a.noise).sample(stream(a.seed, NOISE), actions.shape)
    io.write_dataset_csv(a.out, data.probes, actions)
    print(f"wrote {a.out}: T={data.T}, n={data.n}, m={data.m}")
    return 0


def cmd_run(a) -> int:
    cfg = ExperimentConfig.load(a.config)
    summary = run_experiment(cfg, a.out)
    passed = summary["result"].get("passed", True)
    print(f"{cfg.kind} run finished; summary in {Path(a.out or cfg.output or f'eqkit-{cfg.kind}') / 'summary.json'}")
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqkit", description="Equilibrium learning and detection toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-learning", help="Monte Carlo runs of regret learning")
    s.add_argument("--game", required=True)
    s.add_argument("--graph")
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--delta", type=float, default=0.15)
    s.add_argument("--inertia", type=float)
    s.add_argument("--horizon", type=int, default=5000)
    s.add_argument("--runs", type=int, default=100)
    s.add_argument("--variant", choices=["diffusion", "isolated"], default="diffusion")
    s.add_argument("--fuse-source", choices=["individual", "fused"], default="individual")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="trace.csv")
    s.set_defaults(fn=cmd_simulate_learning)

    s = sub.add_parser("test-afriat", help="utility-maximisation test for one agent")
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_test_afriat)

    s = sub.add_parser("test-nash", help="Nash-rationality test for n agents")
    s.add_argument("--data", required=True)
    s.add_argument("--agents", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_test_nash)

    s = sub.add_parser("stat-test", help="statistical test on noisy observations")
    s.add_argument("--data", required=True)
    s.add_argument("--agents", type=int)
    s.add_argument("--gamma", type=float, default=0.05)
    s.add_argument("--noise", required=True, help="gaussian:SIGMA or uniform:KAPPA")
    s.add_argument("--mc", type=int, default=DEFAULT_MC)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_stat_test)

    s = sub.add_parser("optimize-probe", help="SPSA probe design against Type-II errors")
    s.add_argument("--spec", required=True)
    s.add_argument("--sigma", type=float, default=0.1)
    s.add_argument("--step", type=float, default=0.2)
    s.add_argument("--iters", type=int, default=300)
    s.add_argument("--cost-samples", type=int, default=100)
    s.add_argument("--T", type=int, default=20)
    s.add_argument("--gamma", type=float, default=0.05)
    s.add_argument("--noise", default="uniform:0.1")
    s.add_argument("--mc", type=int, default=DEFAULT_MC)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="probes.csv")
    s.set_defaults(fn=cmd_optimize_probe)

    s = sub.add_parser("gen-data", help="synthetic malicious-agent dataset")
    s.add_argument("--spec", required=True)
    s.add_argument("--T", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", help="add observation noise, e.g. uniform:0.1")
    s.add_argument("--normal", action="store_true", help="non-strategic agents instead of the potential game")
    s.add_argument("--out", default="data.csv")
    s.set_defaults(fn=cmd_gen_data)

    s = sub.add_parser("run", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"eqkit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

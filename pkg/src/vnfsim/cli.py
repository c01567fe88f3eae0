"""Command line front end: ``vnfsim {gen-traces,solve-pi,train-ql,evaluate,experiment}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import harness, qlearning
from .config import ScenarioConfig, load_config
from .errors import (
    ConfigError,
    ScenarioMismatchError,
    ScenarioTooLargeError,
    TraceFormatError,
    TraceMismatchError,
    VnfSimError,
)
from .mdp import SolvedPolicy, bellman_residual, policy_iteration
from .traces import read_trace_dir, write_trace

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_TOO_LARGE = 3
EXIT_MISMATCH = 4
EXIT_IO = 5

log = logging.getLogger("vnfsim")


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1) + "\n")


def _load_cfg(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    if args.set:
        cfg = cfg.with_overrides(args.set)
    if args.seed is not None:
        cfg = cfg.with_overrides({"files.base_seed": args.seed, "ql.seed": args.seed})
    return cfg


def _traces(cfg: ScenarioConfig, directory, prefix: str):
    if directory:
        traces = read_trace_dir(directory, prefix)
        rates = tuple(t.arrival_rate for t in cfg.scenario.types)
        if any(tr.arrival_rates != rates for tr in traces):
            raise ScenarioMismatchError(f"{prefix} traces in {directory} were generated with other rates")
        return traces
    return harness.training_traces(cfg) if prefix == "train" else harness.evaluation_traces(cfg)


def cmd_gen_traces(args) -> None:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for prefix, traces in (("train", harness.training_traces(cfg)), ("eval", harness.evaluation_traces(cfg))):
        for n, trace in enumerate(traces):
            write_trace(trace, out / f"{prefix}_{n:03d}.jsonl")
    print(f"wrote {cfg.files['n_train']} train and {cfg.files['n_eval']} eval traces to {out}")


def cmd_solve_pi(args) -> None:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = policy_iteration(cfg.scenario, cfg.pi["gamma"], cfg.pi["theta"])
    wall = time.perf_counter() - t0
    stats = {
        "states": res.model.n_states,
        "iterations": res.iterations,
        "bellman_residual": bellman_residual(res.model, res.values, res.gamma),
        "residual_bound": 10 * res.theta,
        "proactive_rejections": res.proactive_rejections(),
    }
    _dump_json(out / "policy.json", res.solved().to_json())
    _dump_json(out / "pi_stats.json", stats)
    print(json.dumps({**stats, "wall_time_s": round(wall, 3)}))


def cmd_train_ql(args) -> None:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traces = _traces(cfg, args.traces, "train")
    agent_cfg = cfg.agent_config()
    episodes = cfg.ql["episodes"]
    table, curve = qlearning.train(cfg.scenario, traces, episodes, agent_cfg)
    art = qlearning.QAgentArtifact(table, agent_cfg, cfg.scenario.hash(), episodes)
    _dump_json(out / "qtable.json", art.to_json())
    harness.write_curve(out / "learning_curve.csv", curve)
    print(f"trained {episodes} episodes, {len(table)} table entries, final avg reward {curve[-1]:.4f}")


def cmd_evaluate(args) -> None:
    cfg = _load_cfg(args)
    scenario = cfg.scenario
    algorithms = harness.check_algorithms(args.algorithms.split(","))
    solved = agents = None
    if args.policy:
        solved = SolvedPolicy.from_json(json.loads(Path(args.policy).read_text()))
        solved.check_scenario(scenario)
    if args.qtable:
        art = qlearning.QAgentArtifact.from_json(json.loads(Path(args.qtable).read_text()))
        art.check_scenario(scenario)
        agents = [art]
    rows = harness.evaluate_algorithms(
        cfg, _traces(cfg, args.traces, "eval"), algorithms,
        train_traces=_traces(cfg, args.traces, "train") if "ql" in algorithms and agents is None else None,
        solved=solved, agents=agents, experiment="evaluate")
    harness.write_results(rows, Path(args.out))
    summary, _ = harness.compare_algorithms(rows)
    for s in summary:
        print(f"{s['algorithm']:>8}: mean rejection {s['mean']:.4f} (std {s['std']:.4f}, n={s['n']})")


def cmd_experiment(args) -> None:
    base = _load_cfg(args) if args.config else None
    overrides = list(args.set or [])
    if base is None and args.seed is not None:
        overrides += [f"files.base_seed={args.seed}", f"ql.seed={args.seed}"]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    exp = harness.ExperimentConfig.from_preset(
        args.preset, base=base, overrides=overrides if base is None else (),
        algorithms=args.algorithms.split(",") if args.algorithms else None,
        seeds=seeds, out=args.out)
    result = harness.run_experiment(exp)
    for s in result.summary:
        print(f"{s['sweep_param']}={s['sweep_value']} {s['algorithm']:>8}: {s['mean']:.4f}")
    for label, curve in result.curves.items():
        tail = curve[-25:]
        print(f"{label}: last-25 mean avg reward {sum(tail) / len(tail):.4f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vnfsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_default="table1"):
        p.add_argument("--config", default=config_default,
                       help="config JSON file or preset name (default: %(default)s)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field by dotted path, e.g. ql.alpha=0.9")
        p.add_argument("--seed", type=int, help="sets both files.base_seed and ql.seed")

    p = sub.add_parser("gen-traces", help="write train_###.jsonl and eval_###.jsonl")
    common(p)
    p.set_defaults(func=cmd_gen_traces)

    p = sub.add_parser("solve-pi", help="solve the MDP with policy iteration")
    common(p)
    p.set_defaults(func=cmd_solve_pi)

    p = sub.add_parser("train-ql", help="train a Q-learning agent")
    common(p)
    p.add_argument("--traces", help="directory with train_###.jsonl (generated from config if omitted)")
    p.set_defaults(func=cmd_train_ql)

    p = sub.add_parser("evaluate", help="evaluate algorithms on the evaluation traces")
    common(p)
    p.add_argument("--traces", help="directory with eval_###.jsonl (and train_###.jsonl)")
    p.add_argument("--policy", help="policy.json from solve-pi (solved on the fly if omitted)")
    p.add_argument("--qtable", help="qtable.json from train-ql (trained on the fly if omitted)")
    p.add_argument("--algorithms", default="pi,ql,bestfit")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a preset parameter study end to end")
    p.add_argument("preset", choices=["arrival_rate", "capacity", "ec_heterogeneity",
                                      "demand_heterogeneity", "alpha_gamma", "eps_decay"])
    common(p, config_default=None)
    p.add_argument("--algorithms", help="comma separated subset of pi,ql,bestfit")
    p.add_argument("--seeds", help="comma separated Q-learning agent seeds")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioTooLargeError as exc:
        print(f"scenario too large: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except (ScenarioMismatchError, TraceMismatchError) as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OSError, TraceFormatError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VnfSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration: evaluate PI, Q-learning and best fit on shared traces."""
from __future__ import annotations

import csv
import json
import logging
import statistics
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import qlearning
from .bestfit import BestFit
from .config import ScenarioConfig, apply_overrides, config_from_dict, load_experiment_preset, load_preset
from .errors import ConfigError, RoundingWarning, TraceMismatchError
from .mdp import MdpState, SolvedPolicy, policy_iteration
from .model import Event, EventKind, Scenario
from .simulator import run_episode
from .traces import Trace, generate_file_set

log = logging.getLogger(__name__)

ALGORITHMS = ("pi", "ql", "bestfit")

RESULT_COLUMNS = ["experiment", "algorithm", "sweep_param", "sweep_value", "trace_seed",
                  "total", "accepted", "rejected", "rejection_ratio", "agent_seed"]
SUMMARY_COLUMNS = ["experiment", "algorithm", "sweep_param", "sweep_value", "n", "mean", "std"]
DELTA_COLUMNS = ["experiment", "sweep_param", "sweep_value", "ql_minus_pi", "bestfit_minus_ql"]


class PiPolicy:
    """Looks up the solved action for the live (allocation, arrival) pair."""

    def __init__(self, solved: SolvedPolicy):
        self.solved = solved

    def decide(self, alloc, vnf_type):
        return self.solved.action_for(MdpState(alloc, Event(EventKind.ARRIVAL, vnf_type)))


def pi_policy_adapter(solved: SolvedPolicy, scenario: Scenario) -> PiPolicy:
    solved.check_scenario(scenario)
    return PiPolicy(solved)


@dataclass
class ResultRow:
    experiment: str
    algorithm: str
    sweep_param: str
    sweep_value: float | str
    trace_seed: int
    total: int
    accepted: int
    rejected: int
    rejection_ratio: float
    agent_seed: int | str = ""


def check_algorithms(algorithms: Iterable[str]) -> list[str]:
    algs = list(dict.fromkeys(algorithms))
    unknown = [a for a in algs if a not in ALGORITHMS]
    if unknown or not algs:
        raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}, got {algs}")
    return [a for a in ALGORITHMS if a in algs]


def training_traces(cfg: ScenarioConfig) -> list[Trace]:
    f = cfg.files
    return generate_file_set(cfg.scenario.types, f["n_train"], f["n_requests"], f["base_seed"])


def evaluation_traces(cfg: ScenarioConfig) -> list[Trace]:
    f = cfg.files
    return generate_file_set(cfg.scenario.types, f["n_eval"], f["n_requests"], f["base_seed"] + f["n_train"])


def evaluate_algorithms(cfg: ScenarioConfig, eval_traces: Sequence[Trace],
                        algorithms: Iterable[str] = ALGORITHMS,
                        agent_seeds: Sequence[int] | None = None,
                        train_traces: Sequence[Trace] | None = None,
                        solved: SolvedPolicy | None = None,
                        agents: Sequence[qlearning.QAgentArtifact] | None = None,
                        experiment: str = "", sweep_param: str = "",
                        sweep_value: float | str = "") -> list[ResultRow]:
    """One evaluation episode per (algorithm, agent seed, trace).

    Missing artifacts are produced on the spot: PI is solved and the Q agent
    is trained on ``train_traces`` (or the config's training set).  Every Q
    evaluation starts from a fresh copy of the trained table.
    """
    scenario = cfg.scenario
    algorithms = check_algorithms(algorithms)
    rows: list[ResultRow] = []
    tag = dict(experiment=experiment, sweep_param=sweep_param, sweep_value=sweep_value)

    def add(alg, trace, res, agent_seed=""):
        rows.append(ResultRow(algorithm=alg, trace_seed=trace.seed, total=res.total_arrivals,
                              accepted=res.accepted, rejected=res.rejected,
                              rejection_ratio=res.rejection_ratio, agent_seed=agent_seed, **tag))

    if "pi" in algorithms:
        if solved is None:
            solved = policy_iteration(scenario, cfg.pi["gamma"], cfg.pi["theta"]).solved()
        policy = pi_policy_adapter(solved, scenario)
        for trace in eval_traces:
            add("pi", trace, run_episode(policy, trace, scenario))

    if "ql" in algorithms:
        if agents is None:
            seeds = [cfg.ql["seed"]] if agent_seeds is None else list(agent_seeds)
            train_set = training_traces(cfg) if train_traces is None else train_traces
            agents = []
            for seed in seeds:
                agent_cfg = cfg.agent_config(seed)
                table, _ = qlearning.train(scenario, train_set, cfg.ql["episodes"], agent_cfg)
                agents.append(qlearning.QAgentArtifact(table, agent_cfg, scenario.hash(), cfg.ql["episodes"]))
        for agent in agents:
            agent.check_scenario(scenario)
            for trace in eval_traces:
                res, _ = qlearning.evaluate_episode(agent.table, trace, scenario, agent.config,
                                                    agent.episodes_trained)
                add("ql", trace, res, agent.config.seed)

    if "bestfit" in algorithms:
        for trace in eval_traces:
            add("bestfit", trace, run_episode(BestFit(scenario, trace.seed), trace, scenario))

    return rows


def _to_int(x: float, what: str) -> int:
    r = round(x)
    if abs(x - r) > 1e-9:
        warnings.warn(f"{what} = {x:g} is not integral, rounded to {r}", RoundingWarning, stacklevel=3)
    return int(r)


def derive_config(base: ScenarioConfig, preset: dict, value: float) -> tuple[ScenarioConfig, dict]:
    """Scenario for one sweep point plus the parameter row it corresponds to."""
    kind = preset["kind"]
    data = base.data
    param = preset["param"]
    if kind == "arrival_rate":
        lam = [round(value * t["lambda"], 10) for t in data["vnf_types"]]
        sets = {f"vnf_types.{i}.lambda": x for i, x in enumerate(lam)}
        row = {param: value, "lambda": lam, "mu": [t["mu"] for t in data["vnf_types"]]}
    elif kind == "capacity":
        cpu = [_to_int(value * ec["cpu"], f"EC{k + 1} cpu") for k, ec in enumerate(data["topology"])]
        bw = [_to_int(value * ec["bw"], f"EC{k + 1} bw") for k, ec in enumerate(data["topology"])]
        sets = {}
        for k in range(len(cpu)):
            sets[f"topology.{k}.cpu"] = cpu[k]
            sets[f"topology.{k}.bw"] = bw[k]
        row = {param: value, "fcpu": cpu, "fbw": bw}
    elif kind == "ec_heterogeneity":
        ec1 = preset["ec1"]
        cpu2 = _to_int(value * ec1["cpu"], "EC2 cpu")
        bw2 = _to_int(ec1["bw"] / value, "EC2 bw")
        sets = {"topology.0.cpu": ec1["cpu"], "topology.0.bw": ec1["bw"],
                "topology.1.cpu": cpu2, "topology.1.bw": bw2}
        row = {param: value, "ec2_fcpu": cpu2, "ec2_fbw": bw2}
    elif kind == "demand_heterogeneity":
        ref = preset["req2_base"]
        cpu2 = _to_int(value * ref["cpu"], "req2 cpu")
        bw2 = _to_int(ref["bw"] / value, "req2 bw")
        sets = {"vnf_types.1.cpu": cpu2, "vnf_types.1.bw": bw2}
        row = {param: value, "req2_cpu": cpu2, "req2_bw": bw2}
    else:
        raise ConfigError(f"experiment kind {kind!r} has no scenario sweep")
    return config_from_dict(apply_overrides(data, sets)), row


@dataclass
class ExperimentConfig:
    name: str
    base: ScenarioConfig
    preset: dict
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    seeds: list[int] | None = None
    out: Path | None = None

    @property
    def kind(self) -> str:
        return self.preset["kind"]

    @property
    def values(self) -> list:
        return list(self.preset.get("values", []))

    @classmethod
    def from_preset(cls, name: str, base: ScenarioConfig | None = None,
                    overrides: Iterable[str] | dict = (), algorithms: Iterable[str] | None = None,
                    seeds: Sequence[int] | None = None, out: str | Path | None = None) -> "ExperimentConfig":
        preset = load_experiment_preset(name)
        base = load_preset(preset["base"]) if base is None else base
        if preset.get("files"):
            base = base.with_overrides({f"files.{k}": v for k, v in preset["files"].items()})
        if overrides:
            base = base.with_overrides(overrides)
        algs = check_algorithms(algorithms or preset.get("algorithms", ALGORITHMS))
        if any(v <= 0 for v in preset.get("values", [])):
            raise ConfigError("sweep values must be positive")
        return cls(name, base, preset, algs, list(seeds) if seeds is not None else None,
                   Path(out) if out is not None else None)


@dataclass
class ExperimentResult:
    name: str
    rows: list[ResultRow] = field(default_factory=list)
    params: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    deltas: list[dict] = field(default_factory=list)
    curves: dict[str, list[float]] = field(default_factory=dict)

    def mean(self, algorithm: str, sweep_value) -> float:
        return next(s["mean"] for s in self.summary
                    if s["algorithm"] == algorithm and s["sweep_value"] == sweep_value)


def run_experiment(exp: ExperimentConfig) -> ExperimentResult:
    if exp.kind == "learning_curve":
        result = _run_learning_curves(exp)
    else:
        result = ExperimentResult(exp.name)
        for value in exp.values:
            cfg, row = derive_config(exp.base, exp.preset, value)
            result.params.append(row)
            log.info("%s: %s=%s", exp.name, exp.preset["param"], value)
            result.rows += evaluate_algorithms(
                cfg, evaluation_traces(cfg), exp.algorithms, exp.seeds,
                train_traces=training_traces(cfg), experiment=exp.name,
                sweep_param=exp.preset["param"], sweep_value=value)
        result.summary, result.deltas = compare_algorithms(result.rows)
    if exp.out is not None:
        write_experiment(result, exp.out)
    return result


def _run_learning_curves(exp: ExperimentConfig) -> ExperimentResult:
    result = ExperimentResult(exp.name)
    for setting in exp.preset["settings"]:
        cfg = exp.base.with_overrides(setting["set"])
        seed = cfg.ql["seed"] if not exp.seeds else exp.seeds[0]
        _, curve = qlearning.train(cfg.scenario, training_traces(cfg), cfg.ql["episodes"],
                                   cfg.agent_config(seed))
        result.curves[setting["label"]] = curve
        result.params.append({"label": setting["label"], **setting["set"]})
    return result


def _std(xs: Sequence[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def compare_algorithms(rows: Sequence[ResultRow]) -> tuple[list[dict], list[dict]]:
    """Mean and std of the rejection ratio per (sweep value, algorithm) plus pairwise deltas.

    Every algorithm must have been evaluated on the same trace seeds at each
    sweep value.
    """
    groups: dict[tuple, dict[str, list[ResultRow]]] = {}
    for r in rows:
        key = (r.experiment, r.sweep_param, r.sweep_value)
        groups.setdefault(key, {}).setdefault(r.algorithm, []).append(r)

    summary, deltas = [], []
    for key in sorted(groups, key=lambda k: (k[0], k[1], str(type(k[2])), k[2])):
        by_alg = groups[key]
        trace_sets = {alg: sorted({r.trace_seed for r in rs}) for alg, rs in by_alg.items()}
        if len({tuple(v) for v in trace_sets.values()}) > 1:
            raise TraceMismatchError(f"algorithms saw different traces at {key}: {trace_sets}")
        means = {}
        for alg in sorted(by_alg, key=lambda a: ALGORITHMS.index(a) if a in ALGORITHMS else len(ALGORITHMS)):
            ratios = [r.rejection_ratio for r in by_alg[alg]]
            means[alg] = float(np.mean(ratios))
            summary.append({"experiment": key[0], "algorithm": alg, "sweep_param": key[1],
                            "sweep_value": key[2], "n": len(ratios),
                            "mean": means[alg], "std": _std(ratios)})
        deltas.append({"experiment": key[0], "sweep_param": key[1], "sweep_value": key[2],
                       "ql_minus_pi": means["ql"] - means["pi"] if {"ql", "pi"} <= means.keys() else "",
                       "bestfit_minus_ql": means["bestfit"] - means["ql"] if {"bestfit", "ql"} <= means.keys() else ""})
    return summary, deltas


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row[c] for c in columns})


def write_results(rows: Sequence[ResultRow], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    summary, deltas = compare_algorithms(rows)
    write_csv(out / "results.csv", RESULT_COLUMNS, (asdict(r) for r in rows))
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    write_csv(out / "deltas.csv", DELTA_COLUMNS, deltas)


def write_curve(path: Path, curve: Sequence[float]) -> None:
    write_csv(path, ["episode", "avg_reward"],
              ({"episode": e, "avg_reward": r} for e, r in enumerate(curve)))


def write_experiment(result: ExperimentResult, out: Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "params.json").write_text(json.dumps(result.params, indent=2) + "\n")
    if result.curves:
        for label, curve in result.curves.items():
            write_curve(out / f"curve_{label}.csv", curve)
    else:
        write_results(result.rows, out)

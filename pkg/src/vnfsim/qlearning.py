"""Tabular Q-learning over the observable ("practical") network state.

The agent only sees arrivals.  Its state key is

    (req_cpu, req_bw, free_cpu_1..free_cpu_K, free_bw_1..free_bw_K)

and its actions are REJECT or an EC index.  Placements that do not fit are
masked out of both action selection and the bootstrap max.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ScenarioMismatchError
from .model import REJECT, Alloc, Scenario, feasible_ecs, free_bw, free_cpu
from .simulator import EpisodeResult, run_episode
from .traces import Trace

State = tuple[int, ...]


@dataclass(frozen=True)
class EpsilonSchedule:
    eps_min: float = 0.001
    eps_max: float = 1.0
    eps_decay: float = 0.1

    def __post_init__(self):
        if not 0 <= self.eps_min <= self.eps_max <= 1:
            raise ValueError(f"need 0 <= eps_min <= eps_max <= 1, got {self}")
        if self.eps_decay < 0:
            raise ValueError("eps_decay must be >= 0")


@dataclass(frozen=True)
class AgentConfig:
    alpha: float = 0.5
    gamma: float = 0.5
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.alpha <= 1 and 0 <= self.gamma <= 1):
            raise ValueError("alpha and gamma must lie in [0, 1]")


def epsilon_at(schedule: EpsilonSchedule, episode: int) -> float:
    if episode < 0:
        raise ValueError("episode must be >= 0")
    span = schedule.eps_max - schedule.eps_min
    eps = schedule.eps_min + span * math.exp(-schedule.eps_decay * episode)
    return min(max(eps, schedule.eps_min), schedule.eps_max)


def practical_state(alloc: Alloc, scenario: Scenario, vnf_type: int) -> State:
    t = scenario.types[vnf_type]
    ks = range(scenario.n_ecs)
    return (t.cpu_demand, t.bw_demand,
            *(free_cpu(alloc, scenario, k) for k in ks),
            *(free_bw(alloc, scenario, k) for k in ks))


def feasible_actions(alloc: Alloc, scenario: Scenario, vnf_type: int) -> tuple[int, ...]:
    return (REJECT, *feasible_ecs(alloc, scenario, vnf_type))


class QTable:
    """Sparse Q-table; pairs never written read as 0."""

    def __init__(self):
        self._q: dict[State, dict[int, float]] = {}

    def get(self, s: State, a: int) -> float:
        row = self._q.get(s)
        return row.get(a, 0.0) if row else 0.0

    def set(self, s: State, a: int, value: float) -> None:
        self._q.setdefault(s, {})[a] = value

    def __contains__(self, s) -> bool:
        return s in self._q

    def __len__(self) -> int:
        return sum(len(row) for row in self._q.values())

    def states(self) -> Iterable[State]:
        return self._q.keys()

    def items(self):
        for s in sorted(self._q):
            for a in sorted(self._q[s]):
                yield s, a, self._q[s][a]

    def copy(self) -> "QTable":
        new = QTable()
        new._q = {s: dict(row) for s, row in self._q.items()}
        return new

    def __eq__(self, other):
        return isinstance(other, QTable) and self._q == other._q


def greedy(q: QTable, s: State, feasible: Sequence[int], rng: np.random.Generator) -> int:
    """Highest-valued feasible action; exact ties are broken uniformly at random."""
    values = [q.get(s, a) for a in feasible]
    best = max(values)
    ties = [a for a, v in zip(feasible, values) if v == best]
    if len(ties) == 1:
        return ties[0]
    return ties[int(rng.integers(len(ties)))]


def select_action(q: QTable, s: State, feasible: Sequence[int], eps: float,
                  rng: np.random.Generator) -> int:
    if rng.random() < eps:
        return feasible[int(rng.integers(len(feasible)))]
    return greedy(q, s, feasible, rng)


def td_update(q: QTable, s: State, a: int, r: float, s_next: State | None,
              feasible_next: Sequence[int], cfg: AgentConfig) -> QTable:
    """One Q-learning backup.  ``s_next=None`` marks the end of a trace (target = r)."""
    if cfg.alpha == 0:
        return q
    target = r
    if s_next is not None:
        target += cfg.gamma * max(q.get(s_next, b) for b in feasible_next)
    old = q.get(s, a)
    q.set(s, a, old + cfg.alpha * (target - old))
    return q


class _Learner:
    """Decision source that learns while it acts.

    The backup for a step is deferred until the next arrival reveals s'.
    States in ``known`` are handled greedily without exploration or update.
    """

    def __init__(self, table: QTable, scenario: Scenario, cfg: AgentConfig, eps: float,
                 rng: np.random.Generator, known=None):
        self.table, self.scenario, self.cfg = table, scenario, cfg
        self.eps, self.rng, self.known = eps, rng, known
        self._pending = None

    def decide(self, alloc, vnf_type):
        s = practical_state(alloc, self.scenario, vnf_type)
        feasible = feasible_actions(alloc, self.scenario, vnf_type)
        if self._pending is not None:
            td_update(self.table, *self._pending, s, feasible, self.cfg)
            self._pending = None
        if self.known is not None and s in self.known:
            return greedy(self.table, s, feasible, self.rng)
        a = select_action(self.table, s, feasible, self.eps, self.rng)
        self._pending = (s, a, 0.0 if a == REJECT else 1.0)
        return a

    def finish(self):
        if self._pending is not None:
            td_update(self.table, *self._pending, None, (), self.cfg)
            self._pending = None


def train(scenario: Scenario, traces: Sequence[Trace], episodes: int, cfg: AgentConfig,
          table: QTable | None = None) -> tuple[QTable, list[float]]:
    """Run ``episodes`` passes, episode e replaying ``traces[e % len(traces)]``.

    Returns the table and the per-episode average reward (accepted / arrivals).
    """
    if episodes < 1 or not traces:
        raise ValueError("need at least one episode and one trace")
    table = QTable() if table is None else table
    rng = np.random.default_rng(cfg.seed)
    curve = []
    for e in range(episodes):
        learner = _Learner(table, scenario, cfg, epsilon_at(cfg.schedule, e), rng)
        res = run_episode(learner, traces[e % len(traces)], scenario)
        curve.append(res.avg_reward)
    return table, curve


def evaluate_episode(table: QTable, trace: Trace, scenario: Scenario, cfg: AgentConfig,
                     episodes_trained: int = 0, rng: np.random.Generator | None = None,
                     copy: bool = True) -> tuple[EpisodeResult, QTable]:
    """Single evaluation pass that keeps learning on states the table has never seen.

    Known states are the ones present when the pass starts.  Unknown states
    are explored with the epsilon reached at the end of training.
    """
    table = table.copy() if copy else table
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    eps = epsilon_at(cfg.schedule, episodes_trained)
    learner = _Learner(table, scenario, cfg, eps, rng, known=frozenset(table.states()))
    return run_episode(learner, trace, scenario), table


def evaluate(table: QTable, trace: Trace, scenario: Scenario, cfg: AgentConfig,
             episodes_trained: int = 0, rng: np.random.Generator | None = None) -> tuple[float, QTable]:
    res, table = evaluate_episode(table, trace, scenario, cfg, episodes_trained, rng)
    return res.rejection_ratio, table


def _label(a: int) -> str:
    return "reject" if a == REJECT else f"ec{a + 1}"


def _unlabel(s: str) -> int:
    return REJECT if s == "reject" else int(s[2:]) - 1


@dataclass
class QAgentArtifact:
    """A trained table plus what is needed to replay it safely."""

    table: QTable
    config: AgentConfig
    scenario_hash: str
    episodes_trained: int

    def check_scenario(self, scenario: Scenario) -> None:
        if scenario.hash() != self.scenario_hash:
            raise ScenarioMismatchError("Q-table was trained on a different scenario")

    def to_json(self) -> dict:
        return {
            "entries": [{"state": list(s), "action": _label(a), "value": v}
                        for s, a, v in self.table.items()],
            "config": asdict(self.config),
            "scenario_hash": self.scenario_hash,
            "episodes_trained": self.episodes_trained,
        }

    @classmethod
    def from_json(cls, data: dict) -> "QAgentArtifact":
        table = QTable()
        for e in data["entries"]:
            table.set(tuple(e["state"]), _unlabel(e["action"]), float(e["value"]))
        c = dict(data["config"])
        cfg = AgentConfig(alpha=c["alpha"], gamma=c["gamma"],
                          schedule=EpsilonSchedule(**c["schedule"]), seed=c["seed"])
        return cls(table, cfg, data["scenario_hash"], int(data["episodes_trained"]))

"""Finite MDP for online placement and its Policy Iteration solver.

A state is an allocation matrix plus the event that is being handled: the
arrival of a request of some type (the agent picks an EC or rejects) or the
departure of a request of some type (nothing to decide, the action is void).
Transition probabilities come from competing exponential clocks: every VNF
type contributes an arrival clock with rate lambda_i and every active
request of type i a departure clock with rate mu_i.
"""
from __future__ import annotations

import itertools
import logging
import math
import os
from dataclasses import dataclass, field
from operator import mul
from typing import NamedTuple, Sequence

from .errors import (
    InadmissibleActionError,
    NonConvergenceError,
    ScenarioMismatchError,
    ScenarioTooLargeError,
    StateNotFoundError,
)
from .model import (
    REJECT,
    VOID,
    Alloc,
    Event,
    EventKind,
    Scenario,
    active_count,
    apply_departure,
    apply_placement,
    feasible_ecs,
)

log = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 10**7
DEFAULT_GAMMA = 0.99
DEFAULT_THETA = 1e-6


class MdpState(NamedTuple):
    alloc: Alloc
    event: Event

    def encode(self) -> list[int]:
        """Flattened counts followed by the signed one-hot event vector."""
        n_types = len(self.alloc[0])
        return [n for row in self.alloc for n in row] + self.event.d_vector(n_types)

    @classmethod
    def decode(cls, code: Sequence[int], n_ecs: int, n_types: int) -> "MdpState":
        flat, d = list(code[: n_ecs * n_types]), list(code[n_ecs * n_types:])
        if len(d) != n_types or sorted(map(abs, d)) != [0] * (n_types - 1) + [1]:
            raise ValueError(f"bad state encoding {code!r}")
        alloc = tuple(tuple(flat[k * n_types:(k + 1) * n_types]) for k in range(n_ecs))
        i = next(j for j, x in enumerate(d) if x)
        kind = EventKind.ARRIVAL if d[i] > 0 else EventKind.DEPARTURE
        return cls(alloc, Event(kind, i))


def state_cap_from_env() -> int:
    raw = os.environ.get("VNFSIM_STATE_CAP")
    return int(raw) if raw else DEFAULT_STATE_CAP


def _ec_count_vectors(scenario: Scenario, k: int) -> list[tuple[int, ...]]:
    """Every per-type count vector that fits on EC ``k``, in lexicographic order."""
    ec = scenario.topology.ecs[k]
    types = scenario.types
    out: list[tuple[int, ...]] = []

    def rec(i, prefix, cpu_left, bw_left):
        if i == len(types):
            out.append(tuple(prefix))
            return
        t = types[i]
        n = 0
        while n * t.cpu_demand <= cpu_left and n * t.bw_demand <= bw_left:
            rec(i + 1, prefix + [n], cpu_left - n * t.cpu_demand, bw_left - n * t.bw_demand)
            n += 1

    rec(0, [], ec.cpu_capacity, ec.bw_capacity)
    return out


def enumerate_allocs(scenario: Scenario) -> list[Alloc]:
    per_ec = [_ec_count_vectors(scenario, k) for k in range(scenario.n_ecs)]
    return list(itertools.product(*per_ec))


def enumerate_states(scenario: Scenario, state_cap: int | None = None) -> list[MdpState]:
    """All capacity-feasible allocations crossed with their admissible events.

    Ordered lexicographically on the flattened counts, then on the event
    (arrivals before departures, then by type).
    """
    cap = state_cap_from_env() if state_cap is None else state_cap
    per_ec = [_ec_count_vectors(scenario, k) for k in range(scenario.n_ecs)]
    n_alloc = math.prod(len(v) for v in per_ec)
    if n_alloc * scenario.n_types > cap:
        raise ScenarioTooLargeError(
            f"at least {n_alloc * scenario.n_types} states, cap is {cap}")
    states = []
    for alloc in itertools.product(*per_ec):
        for i in range(scenario.n_types):
            states.append(MdpState(alloc, Event(EventKind.ARRIVAL, i)))
        for i in range(scenario.n_types):
            if active_count(alloc, i) > 0:
                states.append(MdpState(alloc, Event(EventKind.DEPARTURE, i)))
        if len(states) > cap:
            raise ScenarioTooLargeError(f"more than {cap} states")
    return states


def total_event_rate(alloc: Alloc, scenario: Scenario) -> float:
    rate = sum(t.arrival_rate for t in scenario.types)
    return rate + sum(active_count(alloc, i) * t.departure_rate
                      for i, t in enumerate(scenario.types))


def next_event_distribution(alloc: Alloc, scenario: Scenario) -> list[tuple[MdpState, float]]:
    """Which clock fires first once the allocation is ``alloc``."""
    total = total_event_rate(alloc, scenario)
    out = [(MdpState(alloc, Event(EventKind.ARRIVAL, j)), t.arrival_rate / total)
           for j, t in enumerate(scenario.types)]
    for j, t in enumerate(scenario.types):
        n = active_count(alloc, j)
        if n:
            out.append((MdpState(alloc, Event(EventKind.DEPARTURE, j)), n * t.departure_rate / total))
    return out


def departure_split(alloc: Alloc, scenario: Scenario, t: int) -> dict[int, float]:
    """Probability that the departing type-``t`` request is the one held by EC k."""
    mu = scenario.types[t].departure_rate
    total = sum(row[t] * mu for row in alloc)
    return {k: row[t] * mu / total for k, row in enumerate(alloc) if row[t]}


def admissible_actions(state: MdpState, scenario: Scenario) -> tuple[int, ...]:
    """Admissible actions in tie-break order: reject first, then ECs by index."""
    if state.event.kind == EventKind.DEPARTURE:
        return (VOID,)
    return (REJECT, *feasible_ecs(state.alloc, scenario, state.event.vnf_type))


def reward(action: int) -> float:
    return 1.0 if action >= 0 else 0.0


def transitions(state: MdpState, action: int, scenario: Scenario) -> list[tuple[MdpState, float]]:
    """Successor distribution of ``(state, action)``, sorted by canonical state order."""
    alloc, (kind, t) = state
    if kind == EventKind.ARRIVAL:
        if action == REJECT:
            branches = [(alloc, 1.0)]
        elif action >= 0 and action in feasible_ecs(alloc, scenario, t):
            branches = [(apply_placement(alloc, scenario, t, action), 1.0)]
        else:
            raise InadmissibleActionError(f"action {action} not admissible in {state}")
    else:
        if action != VOID:
            raise InadmissibleActionError(f"departure states only admit the void action, got {action}")
        branches = [(apply_departure(alloc, t, k), p)
                    for k, p in departure_split(alloc, scenario, t).items()]

    acc: dict[MdpState, float] = {}
    for post, p_branch in branches:
        for nxt, p in next_event_distribution(post, scenario):
            acc[nxt] = acc.get(nxt, 0.0) + p_branch * p
    return sorted(acc.items())


@dataclass
class MdpModel:
    """Enumerated states plus a cached transition table indexed by dense ids."""

    scenario: Scenario
    states: list[MdpState]
    index: dict[MdpState, int]
    actions: list[tuple[int, ...]]
    # succ[s][a] = (successor ids, probabilities)
    succ: list[dict[int, tuple[tuple[int, ...], tuple[float, ...]]]]

    @property
    def n_states(self) -> int:
        return len(self.states)

    def q_value(self, s: int, a: int, values: Sequence[float], gamma: float) -> float:
        idx, probs = self.succ[s][a]
        return reward(a) + gamma * sum(map(mul, probs, map(values.__getitem__, idx)))


def build_model(scenario: Scenario, state_cap: int | None = None) -> MdpModel:
    states = enumerate_states(scenario, state_cap)
    index = {s: n for n, s in enumerate(states)}
    actions, succ = [], []
    for s in states:
        acts = admissible_actions(s, scenario)
        row = {}
        for a in acts:
            dist = transitions(s, a, scenario)
            row[a] = (tuple(index[nxt] for nxt, _ in dist), tuple(p for _, p in dist))
        actions.append(acts)
        succ.append(row)
    log.debug("built MDP with %d states", len(states))
    return MdpModel(scenario, states, index, actions, succ)


def initial_policy(model: MdpModel) -> list[int]:
    return [acts[0] for acts in model.actions]


def policy_evaluation(model: MdpModel, policy: Sequence[int], gamma: float, theta: float,
                      values: Sequence[float] | None = None,
                      max_sweeps: int = 100_000) -> list[float]:
    """In-place (Gauss-Seidel) sweeps until the largest change in a sweep is <= theta."""
    if not 0 <= gamma < 1:
        raise ValueError("gamma must be in [0, 1)")
    if theta <= 0:
        raise ValueError("theta must be positive")
    V = [0.0] * model.n_states if values is None else list(values)
    rows = [model.succ[s][a] for s, a in enumerate(policy)]
    rewards = [reward(a) for a in policy]
    get = V.__getitem__
    for _ in range(max_sweeps):
        delta = 0.0
        for s, (idx, probs) in enumerate(rows):
            v = rewards[s] + gamma * sum(map(mul, probs, map(get, idx)))
            diff = abs(v - V[s])
            if diff > delta:
                delta = diff
            V[s] = v
        if delta <= theta:
            return V
    raise NonConvergenceError(f"policy evaluation did not converge in {max_sweeps} sweeps")


def greedy_action(model: MdpModel, s: int, values: Sequence[float], gamma: float,
                  tie_tol: float = 0.0) -> tuple[int, float, dict[int, float]]:
    """First action, in tie-break order, whose value is within ``tie_tol`` of the best."""
    qs = {a: model.q_value(s, a, values, gamma) for a in model.actions[s]}
    best_q = max(qs.values())
    best = next(a for a in model.actions[s] if qs[a] >= best_q - tie_tol)
    return best, best_q, qs


def policy_improvement(model: MdpModel, values: Sequence[float], gamma: float,
                       policy: Sequence[int], tie_tol: float = 1e-9) -> tuple[list[int], bool]:
    """Greedy policy with respect to ``values``.

    An action is only replaced when the greedy choice beats it by more than
    ``tie_tol``; this keeps near-ties produced by finite-precision evaluation
    from making the iteration flip between equivalent actions forever.
    """
    new_policy = list(policy)
    stable = True
    for s in range(model.n_states):
        best, best_q, qs = greedy_action(model, s, values, gamma, tie_tol)
        old = policy[s]
        if old in qs and qs[old] >= best_q - tie_tol:
            continue
        new_policy[s] = best
        stable = False
    return new_policy, stable


def bellman_residual(model: MdpModel, values: Sequence[float], gamma: float) -> float:
    """max_s |V(s) - max_a sum p (r + gamma V(s'))|."""
    worst = 0.0
    for s in range(model.n_states):
        best = max(model.q_value(s, a, values, gamma) for a in model.actions[s])
        worst = max(worst, abs(values[s] - best))
    return worst


@dataclass
class PiResult:
    model: MdpModel
    policy: list[int]
    values: list[float]
    gamma: float
    theta: float
    iterations: int
    value_history: list[list[float]] = field(default_factory=list, repr=False)

    def solved(self) -> "SolvedPolicy":
        return SolvedPolicy(
            scenario_hash=self.model.scenario.hash(),
            n_ecs=self.model.scenario.n_ecs,
            n_types=self.model.scenario.n_types,
            gamma=self.gamma,
            theta=self.theta,
            states=list(self.model.states),
            actions=list(self.policy),
            values=list(self.values),
        )

    def proactive_rejections(self) -> int:
        """Arrival states where the policy rejects although some EC could host the request."""
        return sum(1 for s, a in enumerate(self.policy)
                   if a == REJECT and len(self.model.actions[s]) > 1)


def policy_iteration(scenario: Scenario | MdpModel, gamma: float = DEFAULT_GAMMA,
                     theta: float = DEFAULT_THETA, max_sweeps: int = 100_000,
                     max_iterations: int = 1_000, tie_tol: float = 1e-9,
                     state_cap: int | None = None, keep_history: bool = False) -> PiResult:
    model = scenario if isinstance(scenario, MdpModel) else build_model(scenario, state_cap)
    policy = initial_policy(model)
    values = None
    history = []
    for it in range(1, max_iterations + 1):
        values = policy_evaluation(model, policy, gamma, theta, values, max_sweeps)
        if keep_history:
            history.append(list(values))
        policy, stable = policy_improvement(model, values, gamma, policy, tie_tol)
        if stable:
            return PiResult(model, policy, values, gamma, theta, it, history)
    raise NonConvergenceError(f"policy iteration not stable after {max_iterations} iterations")


def _action_label(a: int) -> str:
    if a == REJECT:
        return "reject"
    if a == VOID:
        return "void"
    return f"ec{a + 1}"


def _parse_action(label: str) -> int:
    if label == "reject":
        return REJECT
    if label == "void":
        return VOID
    if label.startswith("ec"):
        return int(label[2:]) - 1
    raise ValueError(f"unknown action label {label!r}")


@dataclass
class SolvedPolicy:
    """A solved policy detached from the model, serialisable to JSON."""

    scenario_hash: str
    n_ecs: int
    n_types: int
    gamma: float
    theta: float
    states: list[MdpState]
    actions: list[int]
    values: list[float]

    def __post_init__(self):
        self._lookup = {s: n for n, s in enumerate(self.states)}

    def action_for(self, state: MdpState) -> int:
        try:
            return self.actions[self._lookup[state]]
        except KeyError:
            raise StateNotFoundError(f"state {state} not in policy") from None

    def value_for(self, state: MdpState) -> float:
        return self.values[self._lookup[state]]

    def check_scenario(self, scenario: Scenario) -> None:
        if scenario.hash() != self.scenario_hash:
            raise ScenarioMismatchError("policy was solved for a different scenario")

    def to_json(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "n_ecs": self.n_ecs,
            "n_types": self.n_types,
            "gamma": self.gamma,
            "theta": self.theta,
            "states": [s.encode() for s in self.states],
            "actions": [_action_label(a) for a in self.actions],
            "values": self.values,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SolvedPolicy":
        k, i = data["n_ecs"], data["n_types"]
        return cls(
            scenario_hash=data["scenario_hash"],
            n_ecs=k,
            n_types=i,
            gamma=data["gamma"],
            theta=data["theta"],
            states=[MdpState.decode(c, k, i) for c in data["states"]],
            actions=[_parse_action(a) for a in data["actions"]],
            values=[float(v) for v in data["values"]],
        )

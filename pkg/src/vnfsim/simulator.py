"""Event-driven replay of a trace against a placement decision source."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Protocol

from .errors import InadmissibleActionError
from .model import REJECT, Alloc, Scenario, apply_departure, apply_placement, fits, is_valid_alloc
from .traces import Trace


class DecisionSource(Protocol):
    def decide(self, alloc: Alloc, vnf_type: int) -> int:
        """Return an EC index or ``REJECT`` for an arriving request."""


@dataclass
class EpisodeResult:
    total_arrivals: int
    accepted: int
    rejected: int
    actions: list[int] = field(default_factory=list, repr=False)

    @property
    def rejection_ratio(self) -> float:
        return self.rejected / self.total_arrivals

    @property
    def avg_reward(self) -> float:
        return self.accepted / self.total_arrivals


class RejectAll:
    def decide(self, alloc, vnf_type):
        return REJECT


class FirstFit:
    """Lowest-index EC that fits; handy as a sanity baseline."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def decide(self, alloc, vnf_type):
        for k in range(self.scenario.n_ecs):
            if fits(alloc, self.scenario, vnf_type, k):
                return k
        return REJECT


def run_episode(policy: DecisionSource, trace: Trace, scenario: Scenario,
                check_invariants: bool = False, observer=None) -> EpisodeResult:
    """Replay ``trace`` from an empty network.

    Departures scheduled at or before an arrival time are processed first,
    in (time, seq) order.  ``observer(kind, time, seq, alloc)`` is called
    after every event when given.  A policy that returns an infeasible EC is an
    error: policies are expected to mask their own actions.
    """
    alloc = scenario.empty_alloc()
    pending: list[tuple[float, int, int, int]] = []  # (time, seq, ec, type)
    accepted = rejected = 0
    actions = []
    now = 0.0
    for rec in trace.records:
        now += rec.inter_arrival
        while pending and pending[0][0] <= now:
            t_dep, seq, k, i = heapq.heappop(pending)
            alloc = apply_departure(alloc, i, k)
            if observer:
                observer("departure", t_dep, seq, alloc)
        a = policy.decide(alloc, rec.vnf_type)
        if a == REJECT:
            rejected += 1
        else:
            if not (isinstance(a, int) and 0 <= a < scenario.n_ecs and fits(alloc, scenario, rec.vnf_type, a)):
                raise InadmissibleActionError(
                    f"policy chose infeasible action {a!r} for type {rec.vnf_type} at seq {rec.seq}")
            alloc = apply_placement(alloc, scenario, rec.vnf_type, a)
            heapq.heappush(pending, (now + rec.holding, rec.seq, a, rec.vnf_type))
            accepted += 1
        actions.append(a)
        if check_invariants:
            assert is_valid_alloc(alloc, scenario), f"capacity violated at seq {rec.seq}: {alloc}"
        if observer:
            observer("arrival", now, rec.seq, alloc)
    finish = getattr(policy, "finish", None)
    if finish is not None:
        finish()
    return EpisodeResult(len(trace), accepted, rejected, actions)

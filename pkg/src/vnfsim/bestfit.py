"""Weighted best-fit placement heuristic.

Each feasible EC gets the metric

    l_k = a_k * free_cpu_k / 100 + (1 - a_k) / hops_k,   a_k = used_bw_k / total_bw

where total_bw is the summed link capacity of the network.  The request goes
to the EC with the highest metric.
"""
from __future__ import annotations

import numpy as np

from .model import REJECT, Alloc, Scenario, feasible_ecs, free_bw, free_cpu, used_bw


def score(scenario: Scenario, alloc: Alloc, k: int) -> float:
    total_bw = scenario.topology.total_bw
    hops = scenario.topology.ecs[k].hops
    if total_bw == 0 or hops == 0:
        raise ZeroDivisionError("best fit needs a positive total bandwidth and hop counts")
    a = used_bw(alloc, scenario, k) / total_bw
    return a * free_cpu(alloc, scenario, k) / 100 + (1 - a) / hops


def place(scenario: Scenario, alloc: Alloc, vnf_type: int, rng: np.random.Generator) -> int:
    candidates = feasible_ecs(alloc, scenario, vnf_type)
    if not candidates:
        return REJECT
    if len(candidates) == 1:
        return candidates[0]
    avail = {(free_cpu(alloc, scenario, k), free_bw(alloc, scenario, k)) for k in candidates}
    if len(avail) == 1:
        # every candidate offers the same resources
        return candidates[int(rng.integers(len(candidates)))]
    scores = [score(scenario, alloc, k) for k in candidates]
    return candidates[scores.index(max(scores))]


class BestFit:
    def __init__(self, scenario: Scenario, seed: int | np.random.Generator = 0):
        self.scenario = scenario
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def decide(self, alloc, vnf_type):
        return place(self.scenario, alloc, vnf_type, self.rng)

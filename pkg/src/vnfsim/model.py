"""Domain types and exact integer resource arithmetic.

An allocation is a K x I tuple of tuples: ``alloc[k][i]`` is the number of
active type-``i`` requests hosted on edge node ``k``.  Indices are 0-based
throughout the code; artifacts that humans read use 1-based EC labels.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Sequence

from .errors import ConfigError, DepartureUnderflowError, InfeasiblePlacementError

Alloc = tuple[tuple[int, ...], ...]

# action codes shared by every decision maker
REJECT = -1
VOID = -2


@dataclass(frozen=True)
class VnfType:
    cpu_demand: int
    bw_demand: int
    arrival_rate: float
    departure_rate: float

    def __post_init__(self):
        if self.cpu_demand < 1 or self.bw_demand < 1:
            raise ConfigError(f"VNF demands must be >= 1, got {self}")
        if not (self.arrival_rate > 0 and self.departure_rate > 0):
            raise ConfigError(f"VNF rates must be > 0, got {self}")


@dataclass(frozen=True)
class EcNode:
    cpu_capacity: int
    bw_capacity: int
    hops: int = 1

    def __post_init__(self):
        if self.cpu_capacity < 0 or self.bw_capacity < 0:
            raise ConfigError(f"EC capacities must be >= 0, got {self}")
        if self.hops < 1:
            raise ConfigError(f"EC hops must be >= 1, got {self}")


@dataclass(frozen=True)
class Topology:
    ecs: tuple[EcNode, ...]

    def __post_init__(self):
        object.__setattr__(self, "ecs", tuple(self.ecs))
        if not self.ecs:
            raise ConfigError("topology needs at least one EC")

    def __len__(self):
        return len(self.ecs)

    @property
    def total_bw(self) -> int:
        return sum(ec.bw_capacity for ec in self.ecs)


@dataclass(frozen=True)
class Scenario:
    """A topology together with the VNF catalogue it serves."""

    topology: Topology
    types: tuple[VnfType, ...]

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        if not self.types:
            raise ConfigError("scenario needs at least one VNF type")

    @property
    def n_ecs(self) -> int:
        return len(self.topology.ecs)

    @property
    def n_types(self) -> int:
        return len(self.types)

    def empty_alloc(self) -> Alloc:
        return tuple((0,) * self.n_types for _ in range(self.n_ecs))

    def to_dict(self) -> dict:
        return {
            "topology": [
                {"cpu": ec.cpu_capacity, "bw": ec.bw_capacity, "hops": ec.hops}
                for ec in self.topology.ecs
            ],
            "vnf_types": [
                {"cpu": t.cpu_demand, "bw": t.bw_demand,
                 "lambda": float(t.arrival_rate), "mu": float(t.departure_rate)}
                for t in self.types
            ],
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_lists(cls, ecs: Sequence[Sequence[int]], types: Sequence[Sequence[float]]) -> "Scenario":
        """Shorthand: ``ecs`` rows are (cpu, bw[, hops]); ``types`` rows are (cpu, bw, lambda, mu)."""
        topo = Topology(tuple(EcNode(*row) for row in ecs))
        return cls(topo, tuple(VnfType(*row) for row in types))


class EventKind(IntEnum):
    ARRIVAL = 0
    DEPARTURE = 1


class Event(NamedTuple):
    kind: EventKind
    vnf_type: int

    def d_vector(self, n_types: int) -> list[int]:
        d = [0] * n_types
        d[self.vnf_type] = 1 if self.kind == EventKind.ARRIVAL else -1
        return d


def used_cpu(alloc: Alloc, scenario: Scenario, k: int) -> int:
    return sum(n * t.cpu_demand for n, t in zip(alloc[k], scenario.types))


def used_bw(alloc: Alloc, scenario: Scenario, k: int) -> int:
    return sum(n * t.bw_demand for n, t in zip(alloc[k], scenario.types))


def free_cpu(alloc: Alloc, scenario: Scenario, k: int) -> int:
    return scenario.topology.ecs[k].cpu_capacity - used_cpu(alloc, scenario, k)


def free_bw(alloc: Alloc, scenario: Scenario, k: int) -> int:
    return scenario.topology.ecs[k].bw_capacity - used_bw(alloc, scenario, k)


def fits(alloc: Alloc, scenario: Scenario, t: int, k: int) -> bool:
    vnf = scenario.types[t]
    return (free_cpu(alloc, scenario, k) >= vnf.cpu_demand
            and free_bw(alloc, scenario, k) >= vnf.bw_demand)


def feasible_ecs(alloc: Alloc, scenario: Scenario, t: int) -> list[int]:
    """EC indices (ascending) that can host one more type-``t`` request."""
    return [k for k in range(scenario.n_ecs) if fits(alloc, scenario, t, k)]


def is_valid_alloc(alloc: Alloc, scenario: Scenario) -> bool:
    if len(alloc) != scenario.n_ecs:
        return False
    for k, row in enumerate(alloc):
        if len(row) != scenario.n_types or min(row) < 0:
            return False
        if free_cpu(alloc, scenario, k) < 0 or free_bw(alloc, scenario, k) < 0:
            return False
    return True


def _bump(alloc: Alloc, t: int, k: int, delta: int) -> Alloc:
    row = list(alloc[k])
    row[t] += delta
    return alloc[:k] + (tuple(row),) + alloc[k + 1:]


def apply_placement(alloc: Alloc, scenario: Scenario, t: int, k: int) -> Alloc:
    if not 0 <= k < scenario.n_ecs or not fits(alloc, scenario, t, k):
        raise InfeasiblePlacementError(f"type {t} does not fit on EC {k} (alloc={alloc})")
    return _bump(alloc, t, k, 1)


def apply_departure(alloc: Alloc, t: int, k: int) -> Alloc:
    if alloc[k][t] < 1:
        raise DepartureUnderflowError(f"no active type-{t} request on EC {k}")
    return _bump(alloc, t, k, -1)


def active_count(alloc: Alloc, t: int) -> int:
    return sum(row[t] for row in alloc)

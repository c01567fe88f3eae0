"""Seeded Poisson request traces and their JSON Lines file format.

A trace stores per-request holding times instead of departure events, so the
departure schedule does not depend on which algorithm accepted what.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import accumulate
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, TraceFormatError
from .model import VnfType


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    vnf_type: int
    inter_arrival: float
    holding: float


@dataclass(frozen=True)
class Trace:
    records: tuple[TraceRecord, ...]
    seed: int
    arrival_rates: tuple[float, ...]
    departure_rates: tuple[float, ...]

    def __len__(self):
        return len(self.records)

    def arrival_times(self) -> list[float]:
        return list(accumulate(r.inter_arrival for r in self.records))

    def header(self) -> dict:
        return {"seed": self.seed,
                "rates": {"lambda": list(self.arrival_rates), "mu": list(self.departure_rates)},
                "n": len(self.records)}


def generate_trace(types: Sequence[VnfType], n_requests: int, seed: int) -> Trace:
    """Merged Poisson arrival stream with exponential holding times.

    Draws unit exponentials and rescales them, so two rate vectors that differ
    by a common factor produce the same type sequence with rescaled gaps
    under one seed.
    """
    if n_requests < 1:
        raise ConfigError("n_requests must be >= 1")
    lam = np.array([t.arrival_rate for t in types], dtype=float)
    mu = np.array([t.departure_rate for t in types], dtype=float)
    if lam.size == 0 or not (np.all(lam > 0) and np.all(mu > 0)):
        raise ConfigError("arrival and departure rates must all be positive")

    rng = np.random.default_rng(seed)
    gaps = rng.standard_exponential(n_requests) / lam.sum()
    u = rng.random(n_requests)
    cum = np.cumsum(lam / lam.sum())
    kinds = np.minimum(np.searchsorted(cum, u, side="right"), lam.size - 1)
    holding = rng.standard_exponential(n_requests) / mu[kinds]

    records = tuple(
        TraceRecord(seq=n, vnf_type=int(kinds[n]), inter_arrival=float(gaps[n]), holding=float(holding[n]))
        for n in range(n_requests)
    )
    return Trace(records, int(seed), tuple(float(x) for x in lam), tuple(float(x) for x in mu))


def generate_file_set(types: Sequence[VnfType], n_files: int, n_requests: int,
                      base_seed: int) -> list[Trace]:
    if n_files < 1:
        raise ConfigError("n_files must be >= 1")
    return [generate_trace(types, n_requests, base_seed + n) for n in range(n_files)]


def dumps_trace(trace: Trace) -> str:
    lines = [json.dumps({"header": trace.header()})]
    for r in trace.records:
        lines.append(json.dumps({"seq": r.seq, "type": r.vnf_type,
                                 "inter_arrival": r.inter_arrival, "holding": r.holding}))
    return "\n".join(lines) + "\n"


def loads_trace(text: str) -> Trace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError("empty trace file")
    try:
        header = json.loads(lines[0])["header"]
        rates = header["rates"]
        records = []
        for n, ln in enumerate(lines[1:]):
            row = json.loads(ln)
            rec = TraceRecord(int(row["seq"]), int(row["type"]),
                              float(row["inter_arrival"]), float(row["holding"]))
            if rec.seq != n or rec.inter_arrival < 0 or rec.holding <= 0:
                raise TraceFormatError(f"bad record on line {n + 2}: {ln}")
            records.append(rec)
        trace = Trace(tuple(records), int(header["seed"]),
                      tuple(float(x) for x in rates["lambda"]),
                      tuple(float(x) for x in rates["mu"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"malformed trace: {exc}") from exc
    if len(trace) != header["n"]:
        raise TraceFormatError(f"header says {header['n']} records, found {len(trace)}")
    if any(r.vnf_type >= len(trace.arrival_rates) or r.vnf_type < 0 for r in trace.records):
        raise TraceFormatError("record type index out of range")
    return trace


def write_trace(trace: Trace, path: str | Path) -> None:
    Path(path).write_text(dumps_trace(trace))


def read_trace(path: str | Path) -> Trace:
    return loads_trace(Path(path).read_text())


def read_trace_dir(directory: str | Path, prefix: str) -> list[Trace]:
    files = sorted(Path(directory).glob(f"{prefix}_*.jsonl"))
    if not files:
        raise FileNotFoundError(f"no {prefix}_*.jsonl files in {directory}")
    return [read_trace(f) for f in files]

"""Scenario configuration documents and the presets shipped with the package."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import jsonschema

from .errors import ConfigError
from .mdp import DEFAULT_GAMMA, DEFAULT_THETA
from .model import EcNode, Scenario, Topology, VnfType
from .qlearning import AgentConfig, EpsilonSchedule

_pos = {"type": "number", "exclusiveMinimum": 0}
_unit = {"type": "number", "minimum": 0, "maximum": 1}

SCHEMA = {
    "type": "object",
    "required": ["topology", "vnf_types"],
    "properties": {
        "name": {"type": "string"},
        "topology": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["cpu", "bw"], "additionalProperties": False,
                "properties": {"cpu": {"type": "integer", "minimum": 0},
                               "bw": {"type": "integer", "minimum": 0},
                               "hops": {"type": "integer", "minimum": 1}},
            },
        },
        "vnf_types": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["cpu", "bw", "lambda", "mu"], "additionalProperties": False,
                "properties": {"cpu": {"type": "integer", "minimum": 1},
                               "bw": {"type": "integer", "minimum": 1},
                               "lambda": _pos, "mu": _pos},
            },
        },
        "pi": {
            "type": "object", "additionalProperties": False,
            "properties": {"gamma": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                           "theta": _pos},
        },
        "ql": {
            "type": "object", "additionalProperties": False,
            "properties": {"alpha": _unit, "gamma": _unit, "eps_min": _unit, "eps_max": _unit,
                           "eps_decay": {"type": "number", "minimum": 0},
                           "episodes": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer", "minimum": 0}},
        },
        "files": {
            "type": "object", "additionalProperties": False,
            "properties": {"n_train": {"type": "integer", "minimum": 1},
                           "n_eval": {"type": "integer", "minimum": 1},
                           "n_requests": {"type": "integer", "minimum": 1},
                           "base_seed": {"type": "integer", "minimum": 0}},
        },
    },
}

DEFAULTS = {
    "pi": {"gamma": DEFAULT_GAMMA, "theta": DEFAULT_THETA},
    "ql": {"alpha": 0.5, "gamma": 0.5, "eps_min": 0.001, "eps_max": 1.0, "eps_decay": 0.1,
           "episodes": 250, "seed": 0},
    "files": {"n_train": 10, "n_eval": 20, "n_requests": 500, "base_seed": 0},
}


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated configuration document with defaults filled in."""

    data: dict

    @property
    def name(self) -> str:
        return self.data.get("name", "custom")

    @property
    def scenario(self) -> Scenario:
        topo = Topology(tuple(EcNode(ec["cpu"], ec["bw"], ec.get("hops", 1)) for ec in self.data["topology"]))
        types = tuple(VnfType(t["cpu"], t["bw"], t["lambda"], t["mu"]) for t in self.data["vnf_types"])
        return Scenario(topo, types)

    @property
    def pi(self) -> dict:
        return self.data["pi"]

    @property
    def ql(self) -> dict:
        return self.data["ql"]

    @property
    def files(self) -> dict:
        return self.data["files"]

    def agent_config(self, seed: int | None = None) -> AgentConfig:
        q = self.ql
        return AgentConfig(alpha=q["alpha"], gamma=q["gamma"],
                           schedule=EpsilonSchedule(q["eps_min"], q["eps_max"], q["eps_decay"]),
                           seed=q["seed"] if seed is None else seed)

    def train_seeds(self) -> list[int]:
        f = self.files
        return list(range(f["base_seed"], f["base_seed"] + f["n_train"]))

    def eval_seeds(self) -> list[int]:
        f = self.files
        start = f["base_seed"] + f["n_train"]
        return list(range(start, start + f["n_eval"]))

    def with_overrides(self, overrides: dict[str, Any] | Iterable[str]) -> "ScenarioConfig":
        return config_from_dict(apply_overrides(self.data, overrides))


def _fill_defaults(data: dict) -> dict:
    out = copy.deepcopy(data)
    for section, defaults in DEFAULTS.items():
        out[section] = {**defaults, **out.get(section, {})}
    return out


def config_from_dict(data: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from None
    full = _fill_defaults(data)
    q = full["ql"]
    if q["eps_min"] > q["eps_max"]:
        raise ConfigError("ql.eps_min must not exceed ql.eps_max")
    return ScenarioConfig(full)


def _parse_scalar(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: dict[str, Any] | Iterable[str]) -> dict:
    """Set dotted-path fields, e.g. ``{"ql.alpha": 0.9}`` or ``["ql.alpha=0.9"]``.

    List elements are addressed by index: ``topology.1.cpu=8``.
    """
    if not isinstance(overrides, dict):
        pairs = {}
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not KEY=VALUE")
            key, value = item.split("=", 1)
            pairs[key.strip()] = _parse_scalar(value.strip())
        overrides = pairs
    out = copy.deepcopy(data)
    for path, value in overrides.items():
        node = out
        parts = path.split(".")
        try:
            for part in parts[:-1]:
                node = node[int(part)] if isinstance(node, list) else node.setdefault(part, {})
            last = parts[-1]
            if isinstance(node, list):
                node[int(last)] = value
            else:
                node[last] = value
        except (IndexError, ValueError, TypeError, AttributeError):
            raise ConfigError(f"cannot set {path!r}") from None
    return out


def _preset_dir():
    return resources.files("vnfsim") / "presets"


def load_preset(name: str) -> ScenarioConfig:
    path = _preset_dir() / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown scenario preset {name!r}")
    return config_from_dict(json.loads(path.read_text()))


def load_config(source: str | Path) -> ScenarioConfig:
    """Load a config file, or a shipped preset when ``source`` names one."""
    path = Path(source)
    if not path.exists() and path.suffix == "":
        return load_preset(str(source))
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def experiment_names() -> list[str]:
    return sorted(p.name[:-5] for p in (_preset_dir() / "experiments").iterdir() if p.name.endswith(".json"))


def load_experiment_preset(name: str) -> dict:
    path = _preset_dir() / "experiments" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown experiment preset {name!r}; choose from {experiment_names()}")
    return json.loads(path.read_text())

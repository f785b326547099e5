"""Experiment configuration: YAML file with one section per module, defaults embedded.

Unit conversion (TOPS -> GOPS, km -> m) happens here and nowhere else.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from orbitsplit import model
from orbitsplit.agent import AgentHyperparams
from orbitsplit.env import RewardWeights
from orbitsplit.model import FunctionLoads, LinkParams, NetworkParams, NodeId, NodeParams
from orbitsplit.traffic import TrafficProfile


class ConfigError(ValueError):
    pass


_AGENT_KEYS = [f.name for f in fields(AgentHyperparams) if f.name != "seed"]

DEFAULTS = {
    "model": {
        "nodes": {
            "GAT": {"idle_power_w": 36.0, "epo_j_per_to": 0.0742, "comp_max_tops": 485.0},
            "SAT": {"idle_power_w": 10.0, "epo_j_per_to": 0.625, "comp_max_tops": 32.0},
            "HAP": {"idle_power_w": 7.5, "epo_j_per_to": 5.64, "comp_max_tops": 1.33},
        },
        # feeder links to the gateway
        "links": {
            "SAT": {"distance_km": 600.0, "capacity_mbps": 100.0, "tx_power_w": 35.0},
            "HAP": {"distance_km": 20.0, "capacity_mbps": 10000.0, "tx_power_w": 4.0},
        },
        "loads": {
            "comp_phy_gops": 1280.0,
            "comp_mac_gops": 50.0,
            "comp_rlc_gops": 50.0,
            "comp_pdcp_gops": 100.0,
            "low_mac_fraction": 0.5,
            "low_rlc_fraction": 0.5,
        },
        "relaxed_latency_ms": 10.0,
        "backhaul_mode": False,
        "single_monolithic_capacity": False,
    },
    "traffic": {
        "kind": "business",
        "peak_mbps": 200.0,
        "mean_mbps": 100.0,
        "peak_hour": None,
        "noise_std": 5.0,
        "seed": 1,
        "holdout_seed": 99,
        "steps_per_day": 96,
        "days": 1,
        "trace": None,
    },
    "env": {
        "weights": {"nu1": 1.0, "nu2": 1.0, "nu3": 1.0, "nu4": 0.25, "nu5": 0.25, "nu6": 1.0},
        "episode_length": 100,
        "peak_lambda_mbps": None,
    },
    "agent": {k: getattr(AgentHyperparams(), k) for k in _AGENT_KEYS},
    "run": {
        "seed": 7,
        "out": "runs/latest",
        "oracle": True,
        "initial": "mono@GAT",
        "eval_offset": 0,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    params: NetworkParams
    profile: TrafficProfile
    weights: RewardWeights
    hp: AgentHyperparams
    raw: dict  # fully resolved dictionary, written next to every run

    @property
    def traffic(self) -> dict:
        return self.raw["traffic"]

    @property
    def run(self) -> dict:
        return self.raw["run"]

    @property
    def episode_length(self) -> int:
        return self.raw["env"]["episode_length"]

    @property
    def peak_lambda(self) -> float:
        peak = self.raw["env"]["peak_lambda_mbps"]
        return float(peak if peak is not None else self.profile.peak_mbps)

    @property
    def out(self) -> Path:
        return Path(self.run["out"])

    def initial_configuration(self) -> model.Configuration:
        name = self.run["initial"]
        return model.Configuration.from_placement(model.PLACEMENT_NAMES.index(name), 0)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.raw, sort_keys=True), encoding="utf-8")


def _section(raw, name, build):
    try:
        return build(raw)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _build_params(m: dict) -> NetworkParams:
    nodes = {}
    for name, p in m["nodes"].items():
        nodes[NodeId(name)] = _section(
            p, f"model.nodes.{name}",
            lambda p: NodeParams(float(p["idle_power_w"]), float(p["epo_j_per_to"]), float(p["comp_max_tops"]) * 1e3),
        )
    links = {}
    for name, p in m["links"].items():
        link = _section(
            p, f"model.links.{name}",
            lambda p: LinkParams((NodeId(name), NodeId.GAT), float(p["distance_km"]) * 1e3,
                                 float(p["capacity_mbps"]), float(p["tx_power_w"])),
        )
        links[link.key] = link
    ld = m["loads"]
    loads = _section(ld, "model.loads", lambda ld: FunctionLoads(
        float(ld["comp_phy_gops"]), float(ld["comp_mac_gops"]), float(ld["comp_rlc_gops"]),
        float(ld["comp_pdcp_gops"]), float(ld["low_mac_fraction"]), float(ld["low_rlc_fraction"]),
    ))
    relaxed = float(m["relaxed_latency_ms"])
    if relaxed <= 0:
        raise ConfigError("model.relaxed_latency_ms: must be > 0")
    for key in ("backhaul_mode", "single_monolithic_capacity"):
        if not isinstance(m[key], bool):
            raise ConfigError(f"model.{key}: expected true/false")
    return NetworkParams(
        nodes=nodes,
        links=links,
        loads=loads,
        catalog=tuple(model.split_catalog(relaxed)),
        backhaul_mode=m["backhaul_mode"],
        single_monolithic_capacity=m["single_monolithic_capacity"],
    )


def build(raw: dict) -> ExperimentConfig:
    """Validate a fully merged dictionary and build the typed configuration."""
    for name in raw["model"]["nodes"]:
        if name not in DEFAULTS["model"]["nodes"]:
            raise ConfigError(f"model.nodes.{name}: unknown node")
    params = _build_params(raw["model"])
    t = raw["traffic"]
    profile = _section(t, "traffic", lambda t: TrafficProfile(
        kind=t["kind"], peak_mbps=float(t["peak_mbps"]), mean_mbps=float(t["mean_mbps"]),
        peak_hour=None if t["peak_hour"] is None else float(t["peak_hour"]),
        noise_std=float(t["noise_std"]), seed=int(t["seed"]),
    ))
    if int(t["steps_per_day"]) < 1 or int(t["days"]) < 1:
        raise ConfigError("traffic.steps_per_day and traffic.days must be >= 1")
    w = raw["env"]["weights"]
    for key, value in w.items():
        if not isinstance(value, (int, float)) or value < 0:
            raise ConfigError(f"env.weights.{key}: must be a number >= 0, got {value!r}")
    weights = RewardWeights(**{k: float(v) for k, v in w.items()})
    if int(raw["env"]["episode_length"]) < 1:
        raise ConfigError("env.episode_length: must be >= 1")
    a = raw["agent"]
    hp = _section(a, "agent", lambda a: AgentHyperparams(**a, seed=int(raw["run"]["seed"])))
    if raw["run"]["initial"] not in model.PLACEMENT_NAMES:
        raise ConfigError(f"run.initial: expected one of {', '.join(model.PLACEMENT_NAMES)}")
    return ExperimentConfig(params, profile, weights, hp, raw)


def load(path=None, overrides: dict | None = None) -> ExperimentConfig:
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        raw = _merge(raw, data)
    raw = _merge(raw, overrides or {})
    return build(raw)

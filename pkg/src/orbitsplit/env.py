"""Split/placement MDP driven by an RU traffic trace.

The agent observes the current configuration and traffic, picks a placement
action and a split move, and is rewarded for the constraints the resulting
configuration meets at the next traffic sample.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from orbitsplit import model
from orbitsplit.model import NUM_SPLITS, PLACEMENT_NAMES, PLACEMENTS, Configuration, NetworkParams, Side

NUM_PLACEMENT_ACTIONS = len(PLACEMENTS) + 1  # five placements plus "keep"
KEEP = len(PLACEMENTS)
SPLIT_UP, SPLIT_DOWN, SPLIT_NONE = 0, 1, 2
SPLIT_ACTION_NAMES = ("up", "down", "none")
NUM_ACTIONS = NUM_PLACEMENT_ACTIONS * 3
STATE_DIM = NUM_SPLITS + len(PLACEMENTS) + 10

MAX_TRAFFIC_MBPS = 2500.0
MAX_LATENCY_MS = 10.0


@dataclass(frozen=True)
class RewardWeights:
    nu1: float = 1.0
    nu2: float = 1.0
    nu3: float = 1.0
    nu4: float = 0.25
    nu5: float = 0.25
    # power-shaping term; 0 gives the constraint-only reward
    nu6: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"reward weight {name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class Action:
    placement: int  # 0..4 selects PLACEMENTS[placement], 5 keeps the current one
    split_move: int  # SPLIT_UP / SPLIT_DOWN / SPLIT_NONE

    @classmethod
    def from_index(cls, index: int) -> "Action":
        if not 0 <= index < NUM_ACTIONS:
            raise ValueError(f"action index {index} outside [0, {NUM_ACTIONS})")
        return cls(index // 3, index % 3)

    @property
    def index(self) -> int:
        return self.placement * 3 + self.split_move

    def __str__(self):
        where = "keep" if self.placement == KEEP else PLACEMENT_NAMES[self.placement]
        return f"{where}+{SPLIT_ACTION_NAMES[self.split_move]}"


@dataclass(frozen=True)
class RewardBreakdown:
    terms: tuple  # R1..R5
    weights: RewardWeights
    power_term: float  # 1 - normalized total power
    reward: float

    def as_dict(self) -> dict:
        return {
            **{f"R{j + 1}": v for j, v in enumerate(self.terms)},
            "power_term": self.power_term,
            "reward": self.reward,
        }


def apply_action(cfg: Configuration, action) -> Configuration:
    """Configuration reached from ``cfg``; split moves clamp at 0 and 6."""
    if not isinstance(action, Action):
        action = Action.from_index(int(action))
    placement = cfg.placement if action.placement == KEEP else action.placement
    split = cfg.split
    if action.split_move == SPLIT_UP:
        split = min(split + 1, NUM_SPLITS - 1)
    elif action.split_move == SPLIT_DOWN:
        split = max(split - 1, 0)
    return Configuration.from_placement(placement, split)


def power_reference(params: NetworkParams, peak_lambda: float) -> float:
    """Largest feasible total power at ``peak_lambda``; normalizes power everywhere."""
    feasible, every = [], []
    for cfg in model.all_configurations():
        p = model.total_power(cfg, peak_lambda, params).total_w
        every.append(p)
        if model.check_constraints(cfg, peak_lambda, params).feasible:
            feasible.append(p)
    return max(feasible) if feasible else max(every)


def normalized_power(total_w: float, reference_w: float) -> float:
    """Power over the reference, clipped to [0, 1] (infeasible configs can exceed it)."""
    return min(total_w / reference_w, 1.0)


def compute_reward(
    prev_cfg: Configuration,
    new_cfg: Configuration,
    lambda_ru: float,
    params: NetworkParams,
    weights: RewardWeights,
    power_ref: float,
) -> RewardBreakdown:
    report = model.check_constraints(new_cfg, lambda_ru, params)
    terms = (
        1 if report.latency_ok else -1,
        1 if report.traffic_ok else -1,
        1 if report.compute_ok else -1,
        -1 if new_cfg.placement != prev_cfg.placement else 0,
        -1 if new_cfg.split != prev_cfg.split else 0,
    )
    nu = (weights.nu1, weights.nu2, weights.nu3, weights.nu4, weights.nu5)
    power_term = 1.0 - normalized_power(model.total_power(new_cfg, lambda_ru, params).total_w, power_ref)
    reward = sum(w * r for w, r in zip(nu, terms)) + weights.nu6 * power_term
    return RewardBreakdown(terms, weights, power_term, float(reward))


@dataclass(frozen=True)
class EnvState:
    config: Configuration
    step: int
    lambda_ru: float
    traffic: float  # TRA of the current split
    latency_req_ms: float
    total_power_w: float
    latency_ms: float
    capacity_mbps: float  # feeder capacity, 0 when no feeder link is used
    comp_cu: float
    comp_du: float
    comp_max_cu: float
    comp_max_du: float
    encoding: np.ndarray


def build_state(cfg: Configuration, step: int, lambda_ru: float, params: NetworkParams, power_ref: float) -> EnvState:
    link = params.feeder_link(cfg)
    option = params.catalog[cfg.split]
    fields = dict(
        config=cfg,
        step=step,
        lambda_ru=float(lambda_ru),
        traffic=option.traffic(lambda_ru),
        latency_req_ms=option.latency_req_ms,
        total_power_w=model.total_power(cfg, lambda_ru, params).total_w,
        latency_ms=model.propagation_latency(cfg, params),
        capacity_mbps=link.capacity_mbps if link is not None else 0.0,
        comp_cu=model.computational_load(cfg.split, Side.CU, params.loads, params.catalog),
        comp_du=model.computational_load(cfg.split, Side.DU, params.loads, params.catalog),
        comp_max_cu=params.node(cfg.cu_node).comp_max_gops,
        comp_max_du=params.node(cfg.du_node).comp_max_gops,
    )
    comp_scale = max(n.comp_max_gops for n in params.nodes.values())
    cap_scale = max(link.capacity_mbps for link in params.links.values())
    x = np.zeros(STATE_DIM)
    x[cfg.split] = 1.0
    x[NUM_SPLITS + cfg.placement] = 1.0
    x[NUM_SPLITS + len(PLACEMENTS):] = (
        fields["traffic"] / MAX_TRAFFIC_MBPS,
        fields["latency_req_ms"] / MAX_LATENCY_MS,
        fields["lambda_ru"] / MAX_TRAFFIC_MBPS,
        normalized_power(fields["total_power_w"], power_ref),
        fields["latency_ms"] / MAX_LATENCY_MS,
        fields["capacity_mbps"] / cap_scale,
        fields["comp_cu"] / comp_scale,
        fields["comp_du"] / comp_scale,
        fields["comp_max_cu"] / comp_scale,
        fields["comp_max_du"] / comp_scale,
    )
    return EnvState(encoding=x, **fields)


class EpisodeDone(RuntimeError):
    pass


class SplitEnv:
    """Deterministic environment over a traffic trace (indices wrap around the trace)."""

    def __init__(
        self,
        trace,
        params: NetworkParams | None = None,
        weights: RewardWeights | None = None,
        episode_length: int = 100,
        peak_lambda: float | None = None,
    ):
        self.lambdas = np.array([getattr(s, "lambda_ru_mbps", s) for s in trace], dtype=float)
        if len(self.lambdas) == 0:
            raise ValueError("traffic trace is empty")
        if episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        self.params = params or NetworkParams()
        self.weights = weights or RewardWeights()
        self.episode_length = episode_length
        peak = float(self.lambdas.max()) if peak_lambda is None else peak_lambda
        self.power_ref = power_reference(self.params, peak)
        self.offset = 0
        self.state: EnvState | None = None
        self.done = True

    def lambda_at(self, n: int) -> float:
        return float(self.lambdas[(self.offset + n) % len(self.lambdas)])

    def reset(self, initial=None, seed=None, offset: int = 0) -> EnvState:
        """Start an episode; ``initial`` is a Configuration, or None/"random" for a seeded draw."""
        self.offset = offset
        if initial is None or initial == "random":
            rng = np.random.default_rng(seed)
            configs = model.all_configurations()
            initial = configs[int(rng.integers(len(configs)))]
        self.state = build_state(initial, 0, self.lambda_at(0), self.params, self.power_ref)
        self.done = False
        return self.state

    def step(self, action):
        if self.done:
            raise EpisodeDone("step() called on a finished episode; call reset()")
        prev = self.state.config
        cfg = apply_action(prev, action)
        n = self.state.step + 1
        lam = self.lambda_at(n)
        reward = compute_reward(prev, cfg, lam, self.params, self.weights, self.power_ref)
        self.state = build_state(cfg, n, lam, self.params, self.power_ref)
        self.done = n >= self.episode_length
        return self.state, reward, self.done


def transcript_record(state: EnvState, action, reward: RewardBreakdown) -> str:
    """One JSON line describing a transition into ``state``."""
    action = action if isinstance(action, Action) else Action.from_index(int(action))
    record = {
        "step": state.step,
        "lambda_ru_mbps": state.lambda_ru,
        "action": action.index,
        "action_name": str(action),
        "cu_node": state.config.cu_node.value,
        "du_node": state.config.du_node.value,
        "split": state.config.split,
        **reward.as_dict(),
        "total_w": state.total_power_w,
    }
    return json.dumps(record, sort_keys=True)

"""Exact reference solvers.

``solve_step`` is the per-step (myopic) power minimizer over all 35
placement/split candidates. ``solve_trajectory_dp`` runs backward induction
over the deterministic split MDP and returns the best achievable discounted
return for a trace window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from orbitsplit import model
from orbitsplit.env import NUM_ACTIONS, SplitEnv, apply_action, compute_reward, normalized_power
from orbitsplit.model import NUM_SPLITS, PLACEMENTS, Configuration, FeasibilityReport, NetworkParams, PowerBreakdown

# relative window inside which two candidate totals count as tied
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class StepSolution:
    lambda_ru: float
    config: Configuration | None
    power: PowerBreakdown | None
    report: FeasibilityReport | None
    candidates: int

    @property
    def feasible(self) -> bool:
        return self.config is not None


@dataclass
class OracleSolution:
    steps: list = field(default_factory=list)
    power_ref: float = 1.0

    @property
    def total_power_w(self) -> float:
        return sum(s.power.total_w for s in self.steps if s.feasible)

    @property
    def normalized_power(self) -> np.ndarray:
        return np.array([normalized_power(s.power.total_w, self.power_ref) if s.feasible else np.nan for s in self.steps])

    @property
    def infeasible_steps(self) -> int:
        return sum(not s.feasible for s in self.steps)


def _candidates(allowed_nodes=None, allowed_placements=None):
    for p, (cu, du) in enumerate(PLACEMENTS):
        if allowed_placements is not None and p not in allowed_placements:
            continue
        if allowed_nodes is not None and not {cu, du} <= set(allowed_nodes):
            continue
        for o in range(NUM_SPLITS):
            yield Configuration(cu, du, o)


def solve_step(lambda_ru: float, params: NetworkParams, allowed_nodes=None, allowed_placements=None) -> StepSolution:
    """Minimum-total-power feasible configuration at one traffic level.

    Ties (within TIE_RTOL) go to the lowest split index, then to the placement
    order of PLACEMENTS, which sorts GAT < SAT < HAP.
    """
    feasible = []
    n = 0
    for cfg in _candidates(allowed_nodes, allowed_placements):
        n += 1
        report = model.check_constraints(cfg, lambda_ru, params)
        if report.feasible:
            feasible.append((cfg, model.total_power(cfg, lambda_ru, params), report))
    if not feasible:
        return StepSolution(lambda_ru, None, None, None, n)
    best = min(p.total_w for _, p, _ in feasible)
    tied = [c for c in feasible if c[1].total_w <= best + TIE_RTOL * abs(best)]
    cfg, power, report = min(tied, key=lambda c: (c[0].split, c[0].placement))
    return StepSolution(lambda_ru, cfg, power, report, n)


def solve_trace(trace, params: NetworkParams, power_ref: float, **restrict) -> OracleSolution:
    lams = [getattr(s, "lambda_ru_mbps", s) for s in trace]
    return OracleSolution([solve_step(lam, params, **restrict) for lam in lams], power_ref)


@dataclass
class DPResult:
    initial: Configuration
    actions: list
    configs: list
    rewards: list
    value: float  # optimal discounted return from ``initial``
    values: np.ndarray  # (T + 1, 35) value table


def transition_table() -> np.ndarray:
    """next_config_index[c, a] for the 35 configurations and 18 actions."""
    configs = model.all_configurations()
    table = np.empty((len(configs), NUM_ACTIONS), dtype=int)
    for c in configs:
        for a in range(NUM_ACTIONS):
            table[c.index, a] = apply_action(c, a).index
    return table


class _RewardCache:
    """compute_reward keyed on what it actually depends on."""

    def __init__(self, env: SplitEnv):
        self.env = env
        self.cache = {}

    def __call__(self, prev: Configuration, new: Configuration, lam: float) -> float:
        key = (prev.placement == new.placement, prev.split == new.split, new.index, lam)
        if key not in self.cache:
            env = self.env
            self.cache[key] = compute_reward(prev, new, lam, env.params, env.weights, env.power_ref).reward
        return self.cache[key]


def solve_trajectory_dp(env: SplitEnv, initial: Configuration, mu: float = 0.9, offset: int = 0) -> DPResult:
    """Backward induction over one episode window of ``env``.

    The MDP state is the configuration; the trace is exogenous, so the value
    table is indexed by (time step, configuration). O(T * 35 * 18).
    """
    configs = model.all_configurations()
    nxt = transition_table()
    horizon = env.episode_length
    lam = [float(env.lambdas[(offset + n) % len(env.lambdas)]) for n in range(horizon + 1)]
    reward = _RewardCache(env)

    values = np.zeros((horizon + 1, len(configs)))
    q = np.empty((horizon, len(configs), NUM_ACTIONS))
    for n in range(horizon - 1, -1, -1):
        for c in configs:
            for a in range(NUM_ACTIONS):
                c2 = nxt[c.index, a]
                q[n, c.index, a] = reward(c, configs[c2], lam[n + 1]) + mu * values[n + 1, c2]
        values[n] = q[n].max(axis=1)

    actions, path, rewards = [], [initial], []
    c = initial
    for n in range(horizon):
        a = int(np.argmax(q[n, c.index]))  # first maximum = lowest action index
        c2 = configs[nxt[c.index, a]]
        actions.append(a)
        rewards.append(reward(c, c2, lam[n + 1]))
        path.append(c2)
        c = c2
    return DPResult(initial, actions, path, rewards, float(values[0, initial.index]), values)


def discounted_return(rewards, mu: float) -> float:
    total, factor = 0.0, 1.0
    for r in rewards:
        total += factor * r
        factor *= mu
    return total


def rollout(env: SplitEnv, policy, initial: Configuration, mu: float = 0.9, offset: int = 0):
    """Run ``policy(state) -> action index`` for one episode.

    Returns (discounted return, rewards, states).
    """
    state = env.reset(initial, offset=offset)
    rewards, states = [], [state]
    done = False
    while not done:
        state, r, done = env.step(policy(state))
        rewards.append(r.reward)
        states.append(state)
    return discounted_return(rewards, mu), rewards, states


def myopic_policy(env: SplitEnv):
    """Action maximizing the immediate reward at the next traffic sample (one-step lookahead)."""

    def policy(state):
        lam = env.lambda_at(state.step + 1)
        best, best_a = -np.inf, 0
        for a in range(NUM_ACTIONS):
            new = apply_action(state.config, a)
            r = compute_reward(state.config, new, lam, env.params, env.weights, env.power_ref).reward
            if r > best:
                best, best_a = r, a
        return best_a

    return policy


def random_policy(seed: int):
    rng = np.random.default_rng(seed)
    return lambda state: int(rng.integers(NUM_ACTIONS))

"""Wiring between traffic, environment, agent, oracles and reporting."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from orbitsplit import agent, oracle, reporting, traffic
from orbitsplit.config import ExperimentConfig
from orbitsplit.env import SplitEnv, normalized_power
from orbitsplit.model import NUM_SPLITS, PLACEMENT_NAMES
from orbitsplit.qnet import QNetwork

log = logging.getLogger(__name__)


def make_trace(cfg: ExperimentConfig, holdout: bool = False, path=None):
    """Trace from ``path``, the configured trace file, or the synthetic profile."""
    path = path or cfg.traffic["trace"]
    if path:
        trace = traffic.load_trace(path)
    else:
        profile = cfg.profile
        if holdout:
            profile = traffic.TrafficProfile(
                profile.kind, profile.peak_mbps, profile.mean_mbps, profile.peak_hour,
                profile.noise_std, int(cfg.traffic["holdout_seed"]),
            )
        trace = traffic.generate(profile, int(cfg.traffic["steps_per_day"]), int(cfg.traffic["days"]))
    if not trace:
        raise ValueError("traffic trace is empty")
    return trace


def make_env(cfg: ExperimentConfig, trace) -> SplitEnv:
    return SplitEnv(trace, cfg.params, cfg.weights, cfg.episode_length, peak_lambda=cfg.peak_lambda)


def hour_of(trace, index: int, steps_per_day: int) -> float:
    sample = trace[index % len(trace)]
    return sample.time_of_day_h if hasattr(sample, "time_of_day_h") else (index % steps_per_day) * 24.0 / steps_per_day


def option_table(hours, splits) -> np.ndarray:
    table = np.zeros((24, NUM_SPLITS), dtype=int)
    for h, o in zip(hours, splits):
        table[int(h) % 24, o] += 1
    return table


def train_run(cfg: ExperimentConfig, trace=None) -> agent.TrainingArtifacts:
    trace = trace or make_trace(cfg)
    env = make_env(cfg, trace)
    log.info("training %d episodes (seed %d) on %d-sample trace", cfg.hp.episodes, cfg.hp.seed, len(trace))
    return agent.train(env, cfg.hp, steps_per_day=int(cfg.traffic["steps_per_day"]), progress_every=50)


def compare(cfg: ExperimentConfig, net: QNetwork, trace) -> dict:
    """Greedy rollout of ``net`` against the DP optimum and the myopic power oracle."""
    env = make_env(cfg, trace)
    initial = cfg.initial_configuration()
    offset = int(cfg.run["eval_offset"])
    mu = cfg.hp.discount
    dp = oracle.solve_trajectory_dp(env, initial, mu, offset=offset)
    ret, rewards, states = oracle.rollout(env, agent.greedy_policy(net), initial, mu, offset=offset)

    spd = int(cfg.traffic["steps_per_day"])
    steps = []
    policy_power, oracle_power, hours = [], [], []
    for s, r in zip(states[1:], rewards):
        sol = oracle.solve_step(s.lambda_ru, cfg.params)
        p_pol = normalized_power(s.total_power_w, env.power_ref)
        p_orc = normalized_power(sol.power.total_w, env.power_ref) if sol.feasible else None
        hour = hour_of(trace, offset + s.step, spd)
        policy_power.append(p_pol)
        if p_orc is not None:
            oracle_power.append(p_orc)
        hours.append(hour)
        steps.append({
            "step": s.step, "time_of_day_h": hour, "lambda_ru_mbps": s.lambda_ru,
            "config": str(s.config), "reward": r, "total_w": s.total_power_w,
            "normalized_power": p_pol,
            "oracle_config": str(sol.config) if sol.feasible else None,
            "oracle_normalized_power": p_orc,
        })
    pol_mean = float(np.mean(policy_power))
    orc_mean = float(np.mean(oracle_power)) if oracle_power else float("nan")
    return {
        "initial": str(initial),
        "offset": offset,
        "discount": mu,
        "power_ref_w": env.power_ref,
        "dp_return": dp.value,
        "policy_return": ret,
        "return_gap": (dp.value - ret) / abs(dp.value) if dp.value else 0.0,
        "policy_mean_normalized_power": pol_mean,
        "oracle_mean_normalized_power": orc_mean,
        "power_gap": (pol_mean - orc_mean) / orc_mean,
        "option_by_hour": option_table(hours, [s.config.split for s in states[1:]]).tolist(),
        "placement_counts": {
            name: sum(s.config.placement == p for s in states[1:]) for p, name in enumerate(PLACEMENT_NAMES)
        },
        "steps": steps,
    }


def oracle_run(cfg: ExperimentConfig, trace) -> dict:
    env = make_env(cfg, trace)
    sol = oracle.solve_trace(trace, cfg.params, env.power_ref)
    dp = oracle.solve_trajectory_dp(env, cfg.initial_configuration(), cfg.hp.discount, offset=int(cfg.run["eval_offset"]))
    return {"myopic": sol, "dp": dp, "power_ref_w": env.power_ref}


def write_oracle(result: dict, trace, out: Path) -> None:
    sol, dp = result["myopic"], result["dp"]
    with open(out / "oracle_steps.jsonl", "w", encoding="utf-8") as fh:
        for sample, s in zip(trace, sol.steps):
            rec = {
                "step": sample.step,
                "time_of_day_h": sample.time_of_day_h,
                "lambda_ru_mbps": s.lambda_ru,
                "feasible": s.feasible,
                "cu_node": s.config.cu_node.value if s.feasible else None,
                "du_node": s.config.du_node.value if s.feasible else None,
                "split": s.config.split if s.feasible else None,
                "processing_w": s.power.processing_w if s.feasible else None,
                "transmission_w": s.power.transmission_w if s.feasible else None,
                "total_w": s.power.total_w if s.feasible else None,
                "normalized_power": normalized_power(s.power.total_w, sol.power_ref) if s.feasible else None,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(out / "oracle_steps.csv", "w", encoding="utf-8") as fh:
        fh.write("step,time_of_day_h,lambda_ru_mbps,feasible,cu_node,du_node,split,total_w\n")
        for sample, s in zip(trace, sol.steps):
            if s.feasible:
                fh.write(f"{sample.step},{sample.time_of_day_h!r},{s.lambda_ru!r},1,{s.config.cu_node.value},"
                         f"{s.config.du_node.value},{s.config.split},{s.power.total_w!r}\n")
            else:
                fh.write(f"{sample.step},{sample.time_of_day_h!r},{s.lambda_ru!r},0,,,,\n")
    with open(out / "dp_trajectory.jsonl", "w", encoding="utf-8") as fh:
        for n, (a, c, r) in enumerate(zip(dp.actions, dp.configs[1:], dp.rewards), start=1):
            fh.write(json.dumps({"step": n, "action": a, "config": str(c), "reward": r}, sort_keys=True) + "\n")


def write_training_outputs(cfg: ExperimentConfig, art: agent.TrainingArtifacts, env_power_ref: float, out: Path) -> reporting.RunMetrics:
    art.net.save(out / "checkpoint.json")
    agent.write_log(art.log, out / "training_log.csv")
    metrics = reporting.compute_metrics(art.log, env_power_ref)
    for fmt in ("csv", "jsonl", "svg"):
        reporting.emit(metrics, fmt, out / f"metrics.{fmt}")
    reporting.write_option_table(metrics.option_by_hour, out / "option_by_hour.csv")
    return metrics

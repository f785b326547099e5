"""Command-line entry point: train, evaluate, oracle, compare, sweep.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from orbitsplit import agent, config, experiment, oracle, reporting
from orbitsplit.model import PLACEMENT_NAMES
from orbitsplit.qnet import CheckpointError, QNetwork

log = logging.getLogger("orbitsplit")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _overrides(args) -> dict:
    out: dict = {}
    if getattr(args, "seed", None) is not None:
        out.setdefault("run", {})["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        out.setdefault("run", {})["out"] = str(args.out)
    if getattr(args, "episodes", None) is not None:
        out.setdefault("agent", {})["episodes"] = args.episodes
    if getattr(args, "trace", None) is not None:
        out.setdefault("traffic", {})["trace"] = str(args.trace)
    return out


def _prepare(cfg: config.ExperimentConfig) -> Path:
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "resolved_config.yaml")
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n", encoding="utf-8")


def cmd_train(cfg: config.ExperimentConfig) -> int:
    out = _prepare(cfg)
    trace = experiment.make_trace(cfg)
    env = experiment.make_env(cfg, trace)
    art = experiment.train_run(cfg, trace)
    metrics = experiment.write_training_outputs(cfg, art, env.power_ref, out)
    summary = {
        "episodes": cfg.hp.episodes,
        "seed": cfg.hp.seed,
        "final_long_term_reward": float(metrics.long_term_reward[-1]),
        "mean_normalized_power": float(metrics.normalized_power.mean()),
        "final_reward_ratio": metrics.final_reward_ratio,
        "power_ref_w": metrics.power_ref_w,
    }
    if cfg.run["oracle"]:
        report = experiment.compare(cfg, art.net, experiment.make_trace(cfg, holdout=True))
        summary.update({k: report[k] for k in ("dp_return", "policy_return", "return_gap",
                                               "policy_mean_normalized_power", "oracle_mean_normalized_power",
                                               "power_gap")})
    _write_json(out / "summary.json", summary)
    for key, value in summary.items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_evaluate(cfg: config.ExperimentConfig, checkpoint) -> int:
    out = _prepare(cfg)
    net = QNetwork.load(checkpoint)
    trace = experiment.make_trace(cfg, holdout=True)
    env = experiment.make_env(cfg, trace)
    offset = int(cfg.run["eval_offset"])
    _, rewards, states = oracle.rollout(env, agent.greedy_policy(net), cfg.initial_configuration(),
                                        cfg.hp.discount, offset=offset)
    spd = int(cfg.traffic["steps_per_day"])
    rows = [{
        "step": s.step - 1, "episode": 0, "epsilon": 0.0, "reward": r, "loss": None,
        "action": -1, "placement": PLACEMENT_NAMES[s.config.placement], "split": s.config.split,
        "total_w": s.total_power_w, "lambda_ru_mbps": s.lambda_ru,
        "time_of_day_h": experiment.hour_of(trace, offset + s.step, spd),
    } for s, r in zip(states[1:], rewards)]
    agent.write_log(rows, out / "evaluation_log.csv")
    metrics = reporting.compute_metrics(rows, env.power_ref)
    reporting.emit(metrics, "jsonl", out / "evaluation_metrics.jsonl")
    reporting.write_option_table(metrics.option_by_hour, out / "evaluation_option_by_hour.csv")
    print(f"mean reward: {np.mean(rewards)}")
    print(f"mean normalized power: {metrics.normalized_power[0]}")
    return EXIT_OK


def cmd_oracle(cfg: config.ExperimentConfig) -> int:
    out = _prepare(cfg)
    trace = experiment.make_trace(cfg)
    result = experiment.oracle_run(cfg, trace)
    experiment.write_oracle(result, trace, out)
    sol, dp = result["myopic"], result["dp"]
    chosen = sorted({str(s.config) for s in sol.steps if s.feasible})
    summary = {
        "steps": len(sol.steps),
        "infeasible_steps": sol.infeasible_steps,
        "myopic_configs": chosen,
        "myopic_mean_normalized_power": float(np.nanmean(sol.normalized_power)) if len(sol.steps) > sol.infeasible_steps else None,
        "dp_return": dp.value,
        "power_ref_w": result["power_ref_w"],
    }
    _write_json(out / "oracle_summary.json", summary)
    for key, value in summary.items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_compare(cfg: config.ExperimentConfig, checkpoint) -> int:
    out = _prepare(cfg)
    net = QNetwork.load(checkpoint)
    report = experiment.compare(cfg, net, experiment.make_trace(cfg, holdout=True))
    _write_json(out / "compare_report.json", report)
    for key in ("dp_return", "policy_return", "return_gap", "policy_mean_normalized_power",
                "oracle_mean_normalized_power", "power_gap"):
        print(f"{key}: {report[key]}")
    print("hour " + " ".join(f"o{o}" for o in range(7)))
    for hour, row in enumerate(report["option_by_hour"]):
        print(f"{hour:4d} " + " ".join(f"{c:2d}" for c in row))
    return EXIT_OK


def _sweep_one(args):
    path, overrides = args
    cfg = config.load(path, overrides)
    return cfg.hp.seed, cmd_train(cfg)


def cmd_sweep(cfg_path, overrides: dict, seeds, jobs: int) -> int:
    base = Path(overrides.get("run", {}).get("out") or config.load(cfg_path, overrides).out)
    tasks = []
    for seed in seeds:
        o = {**overrides, "run": {**overrides.get("run", {}), "seed": seed, "out": str(base / f"seed_{seed}")}}
        tasks.append((cfg_path, o))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_sweep_one, tasks))
    return max(code for _, code in results)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitsplit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="YAML experiment file")
        p.add_argument("--seed", type=int, help="agent seed (run.seed)")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--episodes", type=int, help="training episodes (agent.episodes)")
        p.add_argument("--trace", type=Path, help="CSV traffic trace (step,time_of_day_h,lambda_ru_mbps)")
        return p

    common(sub.add_parser("train", help="train a DQN agent"))
    common(sub.add_parser("oracle", help="myopic and DP oracle solutions for a trace"))
    for name, text in (("evaluate", "greedy rollout of a checkpoint"), ("compare", "checkpoint vs oracles")):
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--checkpoint", type=Path, required=True, help="Q-network JSON written by train")
    p = common(sub.add_parser("sweep", help="train several seeds, one directory each"))
    p.add_argument("--seeds", type=int, nargs="+", required=True, help="one training run per seed")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel worker processes")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ORBITSPLIT_LOG", "WARNING").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    overrides = _overrides(args)
    try:
        if args.command == "sweep":
            return cmd_sweep(args.config, overrides, args.seeds, args.jobs)
        cfg = config.load(args.config, overrides)
    except config.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint)
        return cmd_compare(cfg, args.checkpoint)
    except (CheckpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Run metrics (power, reward curves, reward ratio, split-by-hour) and their CSV/JSONL/SVG output."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from orbitsplit.env import normalized_power
from orbitsplit.model import NUM_SPLITS

SCHEMA_VERSION = 1
SHORT_TERM_WINDOW = 50
EPISODE_FIELDS = ("episode", "normalized_power", "mean_reward", "short_term_reward", "long_term_reward", "reward_ratio")


@dataclass
class RunMetrics:
    episodes: np.ndarray
    normalized_power: np.ndarray  # per-episode mean
    rewards: np.ndarray  # every instantaneous reward, in step order
    mean_reward: np.ndarray  # per episode
    short_term_reward: np.ndarray
    long_term_reward: np.ndarray
    reward_ratio: np.ndarray  # cumulative fraction of negative rewards through each episode
    option_by_hour: np.ndarray  # (24, 7) counts of the split in force
    power_ref_w: float
    window: int = SHORT_TERM_WINDOW

    @property
    def final_reward_ratio(self) -> float:
        return float(self.reward_ratio[-1])

    def episode_rows(self):
        for k in range(len(self.episodes)):
            yield {
                "episode": int(self.episodes[k]),
                "normalized_power": float(self.normalized_power[k]),
                "mean_reward": float(self.mean_reward[k]),
                "short_term_reward": float(self.short_term_reward[k]),
                "long_term_reward": float(self.long_term_reward[k]),
                "reward_ratio": float(self.reward_ratio[k]),
            }


def compute_metrics(log, power_ref_w: float, window: int = SHORT_TERM_WINDOW) -> RunMetrics:
    """Aggregate a training/evaluation log (rows with episode, reward, total_w, split, time_of_day_h).

    Normalized power divides by ``power_ref_w``, the largest feasible total
    power at peak traffic, clipped to 1.
    """
    if not log:
        raise ValueError("cannot compute metrics of an empty log")
    episode_ids = np.array([row["episode"] for row in log])
    rewards = np.array([row["reward"] for row in log], dtype=float)
    power = np.array([normalized_power(row["total_w"], power_ref_w) for row in log])

    episodes, starts, counts = np.unique(episode_ids, return_index=True, return_counts=True)
    order = np.argsort(starts)
    episodes, starts, counts = episodes[order], starts[order], counts[order]
    ends = starts + counts
    if np.any(np.diff(episode_ids) < 0) or ends[-1] != len(log):
        raise ValueError("log rows must be grouped by episode in increasing order")

    csum = np.concatenate([[0.0], np.cumsum(rewards)])
    cneg = np.concatenate([[0], np.cumsum(rewards < 0)])
    mean_reward = (csum[ends] - csum[starts]) / counts
    long_term = csum[ends] / ends
    ratio = cneg[ends] / ends
    first = starts[np.maximum(np.arange(len(episodes)) - window + 1, 0)]
    short_term = (csum[ends] - csum[first]) / (ends - first)
    ep_power = np.array([power[s:e].mean() for s, e in zip(starts, ends)])

    table = np.zeros((24, NUM_SPLITS), dtype=int)
    for row in log:
        table[int(row["time_of_day_h"]) % 24, row["split"]] += 1

    return RunMetrics(episodes, ep_power, rewards, mean_reward, short_term, long_term, ratio, table, power_ref_w, window)


def write_csv(metrics: RunMetrics, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EPISODE_FIELDS)
        for row in metrics.episode_rows():
            writer.writerow([row["episode"]] + [repr(row[k]) for k in EPISODE_FIELDS[1:]])


def read_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: (int(v) if k == "episode" else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_jsonl(metrics: RunMetrics, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in metrics.episode_rows():
            record = {"schema_version": SCHEMA_VERSION, "power_ref_w": metrics.power_ref_w, **row}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_option_table(table: np.ndarray, path) -> None:
    """Hour-of-day by split-option counts."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["hour"] + [f"split_{o}" for o in range(table.shape[1])])
        for hour, counts in enumerate(table):
            writer.writerow([hour] + [int(c) for c in counts])


def _polyline(values, x0, y0, width, height):
    values = np.asarray(values, dtype=float)
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo or 1.0
    n = max(len(values) - 1, 1)
    pts = " ".join(
        f"{x0 + width * i / n:.2f},{y0 + height * (1 - (v - lo) / span):.2f}" for i, v in enumerate(values)
    )
    return pts, lo, hi


def write_svg(metrics: RunMetrics, path) -> None:
    series = [
        ("normalized power", metrics.normalized_power),
        ("short-term reward", metrics.short_term_reward),
        ("long-term reward", metrics.long_term_reward),
        ("reward ratio", metrics.reward_ratio),
    ]
    panel_w, panel_h, pad = 600, 140, 40
    height = len(series) * (panel_h + pad) + pad
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{panel_w + 2 * pad}" height="{height}">',
        f"<desc>{escape(f'normalized by {metrics.power_ref_w!r} W')}</desc>",
    ]
    for i, (name, values) in enumerate(series):
        y0 = pad + i * (panel_h + pad)
        pts, lo, hi = _polyline(values, pad, y0, panel_w, panel_h)
        parts += [
            f'<rect x="{pad}" y="{y0}" width="{panel_w}" height="{panel_h}" fill="none" stroke="#999"/>',
            f'<text x="{pad}" y="{y0 - 6}" font-size="12">{escape(name)} [{lo:.4g}, {hi:.4g}]</text>',
            f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.2"/>',
        ]
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def emit(metrics: RunMetrics, fmt: str, path) -> None:
    writers = {"csv": write_csv, "jsonl": write_jsonl, "svg": write_svg}
    if fmt not in writers:
        raise ValueError(f"unknown format {fmt!r}; expected one of {sorted(writers)}")
    try:
        writers[fmt](metrics, path)
    except OSError as exc:
        raise OSError(f"cannot write {fmt} metrics to {path}: {exc.strerror or exc}") from exc

"""RU traffic process: synthetic diurnal profiles and CSV trace I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = ("step", "time_of_day_h", "lambda_ru_mbps")

DEFAULT_PEAK_HOUR = {"business": 12.0, "residential": 20.0}


class TraceError(ValueError):
    """Malformed or invalid traffic trace file."""


@dataclass(frozen=True)
class TrafficProfile:
    kind: str = "business"
    peak_mbps: float = 200.0
    mean_mbps: float = 100.0
    peak_hour: float | None = None
    noise_std: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("business", "residential", "custom"):
            raise ValueError(f"unknown traffic profile kind {self.kind!r}")
        if self.peak_hour is None:
            if self.kind == "custom":
                raise ValueError("a custom profile needs an explicit peak_hour")
            object.__setattr__(self, "peak_hour", DEFAULT_PEAK_HOUR[self.kind])
        if not 0 < self.mean_mbps <= self.peak_mbps:
            raise ValueError(f"need 0 < mean_mbps <= peak_mbps, got {self.mean_mbps}, {self.peak_mbps}")
        if not 0 <= self.peak_hour < 24:
            raise ValueError(f"peak_hour must lie in [0, 24), got {self.peak_hour}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class TrafficSample:
    step: int
    time_of_day_h: float
    lambda_ru_mbps: float


def diurnal_curve(profile: TrafficProfile, hours: np.ndarray) -> np.ndarray:
    """Noise-free raised-cosine daily load, peaking at ``peak_hour``."""
    amplitude = profile.peak_mbps - profile.mean_mbps
    phase = 2 * math.pi * (hours - profile.peak_hour) / 24.0
    return profile.mean_mbps + amplitude * np.cos(phase)


def generate(profile: TrafficProfile, steps_per_day: int = 96, days: int = 1) -> list[TrafficSample]:
    if steps_per_day < 1:
        raise ValueError("steps_per_day must be >= 1")
    if days < 0:
        raise ValueError("days must be >= 0")
    n = steps_per_day * days
    steps = np.arange(n)
    hours = (steps % steps_per_day) * (24.0 / steps_per_day)
    lam = diurnal_curve(profile, hours)
    if profile.noise_std > 0:
        rng = np.random.default_rng(profile.seed)
        lam = lam + rng.normal(0.0, profile.noise_std, size=n)
    lam = np.clip(lam, 0.0, profile.peak_mbps)
    return [TrafficSample(int(k), float(h), float(v)) for k, h, v in zip(steps, hours, lam)]


def lambdas(trace) -> np.ndarray:
    return np.array([s.lambda_ru_mbps for s in trace], dtype=float)


def save_trace(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for s in trace:
            writer.writerow((s.step, repr(s.time_of_day_h), repr(s.lambda_ru_mbps)))


def load_trace(path) -> list[TrafficSample]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return []
    rows = csv.reader(text.splitlines())
    header = next(rows)
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise TraceError(f"{path}:1: expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
    trace = []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise TraceError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            step, hour, lam = int(row[0]), float(row[1]), float(row[2])
        except ValueError as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from None
        if not math.isfinite(lam) or lam < 0:
            raise TraceError(f"{path}:{lineno}: negative or non-finite lambda_ru_mbps {row[2]}")
        if trace and step <= trace[-1].step:
            raise TraceError(f"{path}:{lineno}: steps must be strictly increasing")
        trace.append(TrafficSample(step, hour, lam))
    return trace

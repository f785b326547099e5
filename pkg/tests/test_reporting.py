import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitsplit import reporting


def make_log(rewards_by_episode, total_w=10.0, split=0, steps_per_day=24):
    log, t = [], 0
    for ep, rewards in enumerate(rewards_by_episode):
        for r in rewards:
            log.append({
                "step": t, "episode": ep, "reward": float(r), "total_w": total_w, "split": split,
                "time_of_day_h": float(t % steps_per_day),
            })
            t += 1
    return log


def test_hand_computed_three_episodes():
    log = make_log([[1.0, -1.0], [2.0, 4.0, -3.0], [0.5]])
    m = reporting.compute_metrics(log, 20.0, window=2)
    assert list(m.episodes) == [0, 1, 2]
    assert m.mean_reward == pytest.approx([0.0, 1.0, 0.5])
    assert m.long_term_reward == pytest.approx([0.0, 3.0 / 5, 3.5 / 6])
    # window of two episodes: eps 0-1 then eps 1-2
    assert m.short_term_reward == pytest.approx([0.0, 3.0 / 5, 3.5 / 4])
    assert m.reward_ratio == pytest.approx([1 / 2, 2 / 5, 2 / 6])
    assert m.normalized_power == pytest.approx([0.5, 0.5, 0.5])
    assert m.option_by_hour.sum() == 6 and m.option_by_hour[:6, 0].tolist() == [1] * 6


def test_all_positive_rewards_give_zero_ratio():
    m = reporting.compute_metrics(make_log([[1.0, 2.0]] * 4), 50.0)
    assert np.all(m.reward_ratio == 0)


def test_constant_power_is_flat():
    m = reporting.compute_metrics(make_log([[1.0] * 3] * 5, total_w=13.0), 52.0)
    assert np.all(m.normalized_power == 0.25)


def test_power_clipped_to_one():
    m = reporting.compute_metrics(make_log([[1.0]], total_w=500.0), 52.0)
    assert m.normalized_power[0] == 1.0


def test_empty_log_rejected():
    with pytest.raises(ValueError):
        reporting.compute_metrics([], 1.0)


def test_unordered_log_rejected():
    log = make_log([[1.0], [1.0]])
    with pytest.raises(ValueError):
        reporting.compute_metrics(log[::-1], 1.0)


@given(st.lists(st.lists(st.floats(-5, 5), min_size=1, max_size=4), min_size=1, max_size=70))
@settings(max_examples=40)
def test_window_properties(episodes):
    m = reporting.compute_metrics(make_log(episodes), 10.0)
    flat = np.concatenate([np.array(e, dtype=float) for e in episodes])
    ends = np.cumsum([len(e) for e in episodes])
    for k, end in enumerate(ends):
        assert m.long_term_reward[k] == pytest.approx(flat[:end].mean(), abs=1e-9)
    n = min(50, len(episodes))
    assert m.short_term_reward[:n] == pytest.approx(m.long_term_reward[:n], abs=1e-9)
    assert np.all((m.reward_ratio >= 0) & (m.reward_ratio <= 1))
    assert len(m.short_term_reward) == len(m.long_term_reward) == len(episodes)


@pytest.fixture
def metrics():
    rng = np.random.default_rng(0)
    return reporting.compute_metrics(make_log(rng.normal(1, 2, size=(12, 5)).tolist(), total_w=7.0), 51.9272)


def test_csv_round_trip(tmp_path, metrics):
    path = tmp_path / "m.csv"
    reporting.emit(metrics, "csv", path)
    rows = reporting.read_csv(path)
    assert len(rows) == 12
    for row, ref in zip(rows, metrics.episode_rows()):
        for key, value in ref.items():
            assert row[key] == pytest.approx(value, abs=1e-9)


def test_outputs_are_bit_stable(tmp_path, metrics):
    for fmt in ("csv", "jsonl", "svg"):
        reporting.emit(metrics, fmt, tmp_path / f"a.{fmt}")
        reporting.emit(metrics, fmt, tmp_path / f"b.{fmt}")
        assert (tmp_path / f"a.{fmt}").read_bytes() == (tmp_path / f"b.{fmt}").read_bytes()


def test_jsonl_one_record_per_episode(tmp_path, metrics):
    path = tmp_path / "m.jsonl"
    reporting.emit(metrics, "jsonl", path)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(records) == 12
    assert all(r["schema_version"] == reporting.SCHEMA_VERSION for r in records)
    assert all(r["power_ref_w"] == 51.9272 for r in records)


def test_svg_is_well_formed(tmp_path, metrics):
    path = tmp_path / "m.svg"
    reporting.emit(metrics, "svg", path)
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 4


def test_option_table(tmp_path, metrics):
    path = tmp_path / "o.csv"
    reporting.write_option_table(metrics.option_by_hour, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "hour," + ",".join(f"split_{o}" for o in range(7))
    assert len(lines) == 25


def test_emit_errors(tmp_path, metrics):
    with pytest.raises(ValueError):
        reporting.emit(metrics, "png", tmp_path / "m.png")
    with pytest.raises(OSError, match="missing"):
        reporting.emit(metrics, "csv", tmp_path / "missing" / "m.csv")

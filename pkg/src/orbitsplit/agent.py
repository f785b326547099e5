"""DQN agent: replay memory, quasi-static target network, RMSprop, epsilon-greedy."""

from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from orbitsplit.env import NUM_ACTIONS, STATE_DIM, SplitEnv
from orbitsplit.model import PLACEMENT_NAMES
from orbitsplit.qnet import QNetwork

log = logging.getLogger(__name__)

LOG_FIELDS = (
    "step", "episode", "epsilon", "reward", "loss", "action",
    "placement", "split", "total_w", "lambda_ru_mbps", "time_of_day_h",
)


@dataclass(frozen=True)
class AgentHyperparams:
    discount: float = 0.9
    learning_rate: float = 1e-4
    epsilon_start: float = 0.5
    epsilon_decay: float = 0.995
    epsilon_min: float = 0.0005
    batch_size: int = 32
    buffer_capacity: int = 200
    target_sync: int = 100
    rmsprop_decay: float = 0.99
    rmsprop_eps: float = 1e-8
    grad_clip: float | None = 10.0
    hidden: int = 128
    # start every Q-value at the discounted return upper bound
    optimistic_init: bool = True
    # the episode cap is a time limit, not a terminal state of the process
    bootstrap_at_time_limit: bool = True
    episodes: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must lie in [0, 1]")
        if not 0 < self.epsilon_decay < 1:
            raise ValueError("epsilon_decay must lie in (0, 1)")
        if not 0 <= self.epsilon_min <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 1 <= self.batch_size <= self.buffer_capacity:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if self.target_sync < 1 or self.episodes < 0 or self.hidden < 1:
            raise ValueError("target_sync and hidden must be >= 1, episodes >= 0")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be > 0 or None")

    def epsilon(self, t: int) -> float:
        return max(self.epsilon_min, self.epsilon_start * self.epsilon_decay**t)


class ReplayBuffer:
    """FIFO experience memory of (s, a, r, s', done) tuples."""

    def __init__(self, capacity: int = 200):
        self.capacity = capacity
        self.entries = deque(maxlen=capacity)

    def __len__(self):
        return len(self.entries)

    def add(self, state, action, reward, next_state, done=False):
        self.entries.append((np.asarray(state, dtype=float), int(action), float(reward),
                             np.asarray(next_state, dtype=float), bool(done)))

    def sample(self, n: int, rng):
        if n > len(self.entries):
            raise ValueError(f"cannot sample {n} transitions from a buffer of {len(self.entries)}")
        idx = rng.choice(len(self.entries), size=n, replace=False)
        batch = [self.entries[i] for i in idx]
        s, a, r, s2, d = zip(*batch)
        return np.array(s), np.array(a), np.array(r), np.array(s2), np.array(d)


class RMSprop:
    """RMSprop over one flat parameter vector, updated in place."""

    def __init__(self, size, lr=1e-3, decay=0.99, eps=1e-8):
        self.lr, self.decay, self.eps = lr, decay, eps
        self.sq = np.zeros(size)
        self._tmp = np.empty(size)

    def step(self, theta, grad):
        tmp = self._tmp
        np.multiply(grad, grad, out=tmp)
        tmp *= 1.0 - self.decay
        self.sq *= self.decay
        self.sq += tmp
        np.sqrt(self.sq, out=tmp)
        tmp += self.eps
        np.divide(grad, tmp, out=tmp)
        tmp *= self.lr
        theta -= tmp


def select_action(net: QNetwork, state, epsilon: float, rng) -> int:
    """Epsilon-greedy; greedy ties go to the lowest action index."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    # always draw the coin so the random stream does not depend on epsilon
    if rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(net.forward(state)))


def td_targets(rewards, next_states, dones, target_net: QNetwork, discount: float) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty batch")
    q_next = target_net.forward(np.atleast_2d(next_states)).max(axis=1)
    return rewards + discount * q_next * (1.0 - np.asarray(dones, dtype=float))


def td_loss_and_grads(net: QNetwork, states, actions, targets):
    """Mean squared TD error over the batch and its gradient (only the taken action's output)."""
    q, cache = net.forward_cache(states)
    rows = np.arange(len(actions))
    err = q[rows, actions] - targets
    loss = float(np.mean(err**2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / len(actions)
    return loss, net.backward(cache, dq)


def clip_by_global_norm(grad, max_norm):
    if max_norm is None:
        return grad
    norm = float(np.sqrt(grad @ grad))
    return grad * (max_norm / norm) if norm > max_norm else grad


def train_step(net, target_net, buffer, hp: AgentHyperparams, rng, optimizer: RMSprop) -> float:
    """One minibatch update; returns the loss before the update."""
    if len(buffer) < hp.batch_size:
        raise ValueError(f"buffer holds {len(buffer)} transitions, need {hp.batch_size}")
    s, a, r, s2, d = buffer.sample(hp.batch_size, rng)
    targets = td_targets(r, s2, d, target_net, hp.discount)
    loss, grads = td_loss_and_grads(net, s, a, targets)
    optimizer.step(net.theta, clip_by_global_norm(grads, hp.grad_clip))
    return loss


def sync_target(net: QNetwork, target_net: QNetwork) -> None:
    if not net.same_architecture(target_net):
        raise ValueError("online and target networks have different architectures")
    target_net.theta[...] = net.theta


def return_upper_bound(weights, discount: float, horizon: int) -> float:
    """Largest discounted return any policy can collect over ``horizon`` steps."""
    r_max = weights.nu1 + weights.nu2 + weights.nu3 + weights.nu6
    if discount == 1.0:
        return r_max * horizon
    return r_max * (1.0 - discount**horizon) / (1.0 - discount)


@dataclass
class TrainingArtifacts:
    net: QNetwork
    log: list = field(default_factory=list)
    sync_steps: list = field(default_factory=list)


def train(
    env: SplitEnv,
    hp: AgentHyperparams,
    steps_per_day: int | None = None,
    progress_every: int = 0,
    on_episode_end=None,
) -> TrainingArtifacts:
    """Algorithm-1 style DQN loop over ``hp.episodes`` episodes of ``env``.

    Episode k starts at trace offset ``k * episode_length`` (wrapping), from a
    seeded random configuration. Updates begin once the buffer holds a batch;
    the target network is refreshed whenever the global step is a multiple of
    ``hp.target_sync``. ``on_episode_end(episode, net)`` is called after each
    episode, e.g. for periodic evaluation.
    """
    rng = np.random.default_rng(hp.seed)
    net = QNetwork(STATE_DIM, hp.hidden, NUM_ACTIONS, rng=rng)
    if hp.optimistic_init:
        net.biases[-1][:] = return_upper_bound(env.weights, hp.discount, env.episode_length)
    target = net.copy()
    buffer = ReplayBuffer(hp.buffer_capacity)
    opt = RMSprop(net.num_params, hp.learning_rate, hp.rmsprop_decay, hp.rmsprop_eps)
    steps_per_day = steps_per_day or len(env.lambdas)
    art = TrainingArtifacts(net)

    t = 0
    for episode in range(hp.episodes):
        offset = (episode * env.episode_length) % len(env.lambdas)
        state = env.reset("random", seed=int(rng.integers(2**31)), offset=offset)
        done = False
        while not done:
            eps = hp.epsilon(t)
            action = select_action(net, state.encoding, eps, rng)
            nxt, reward, done = env.step(action)
            buffer.add(state.encoding, action, reward.reward, nxt.encoding, done and not hp.bootstrap_at_time_limit)
            loss = train_step(net, target, buffer, hp, rng, opt) if len(buffer) >= hp.batch_size else None
            if t % hp.target_sync == 0:
                sync_target(net, target)
                art.sync_steps.append(t)
            idx = (offset + nxt.step) % len(env.lambdas)
            art.log.append({
                "step": t,
                "episode": episode,
                "epsilon": eps,
                "reward": reward.reward,
                "loss": loss,
                "action": action,
                "placement": PLACEMENT_NAMES[nxt.config.placement],
                "split": nxt.config.split,
                "total_w": nxt.total_power_w,
                "lambda_ru_mbps": nxt.lambda_ru,
                "time_of_day_h": (idx % steps_per_day) * 24.0 / steps_per_day,
            })
            state = nxt
            t += 1
        if on_episode_end is not None:
            on_episode_end(episode, net)
        if progress_every and (episode + 1) % progress_every == 0:
            recent = [row["reward"] for row in art.log[-env.episode_length:]]
            log.info("episode %d: mean reward %.3f, epsilon %.4f", episode + 1, np.mean(recent), eps)
    return art


def greedy_policy(net: QNetwork):
    return lambda state: int(np.argmax(net.forward(state.encoding)))


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_log(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_FIELDS)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in LOG_FIELDS])


def read_log(path) -> list:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            rows.append({
                "step": int(raw["step"]),
                "episode": int(raw["episode"]),
                "epsilon": float(raw["epsilon"]),
                "reward": float(raw["reward"]),
                "loss": float(raw["loss"]) if raw["loss"] else None,
                "action": int(raw["action"]),
                "placement": raw["placement"],
                "split": int(raw["split"]),
                "total_w": float(raw["total_w"]),
                "lambda_ru_mbps": float(raw["lambda_ru_mbps"]),
                "time_of_day_h": float(raw["time_of_day_h"]),
            })
    return rows

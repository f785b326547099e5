"""Residual MLP Q-network with hand-written backprop (numpy, float64).

Layout: input -> dense -> dense -> [dense, dense + shortcut] x 2 -> linear output.
Six hidden ReLU layers of equal width; each residual block adds its input to
the second layer's pre-activation before the ReLU.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CHECKPOINT_FORMAT = "orbitsplit-qnetwork"
CHECKPOINT_VERSION = 1

LAYER_NAMES = ("dense1", "dense2", "block1a", "block1b", "block2a", "block2b", "output")
NUM_BLOCKS = 2


class CheckpointError(ValueError):
    pass


def relu(x):
    return np.maximum(x, 0.0)


def expected_param_count(state_dim: int, hidden: int, n_actions: int) -> int:
    return (state_dim + 1) * hidden + 5 * (hidden + 1) * hidden + (hidden + 1) * n_actions


class QNetwork:
    def __init__(self, state_dim: int = 22, hidden: int = 128, n_actions: int = 18, rng=None):
        self.state_dim, self.hidden, self.n_actions = state_dim, hidden, n_actions
        rng = rng if rng is not None else np.random.default_rng(0)
        shapes = [(state_dim, hidden)] + [(hidden, hidden)] * 5 + [(hidden, n_actions)]
        self.theta = np.empty(sum((i + 1) * o for i, o in shapes))
        self._bind(shapes)
        for w, b in zip(self.weights, self.biases):
            limit = np.sqrt(6.0 / w.shape[0])  # He-uniform
            w[...] = rng.uniform(-limit, limit, size=w.shape)
            b[...] = 0.0
        assert self.num_params == expected_param_count(state_dim, hidden, n_actions)

    def _bind(self, shapes):
        """Point per-layer weight/bias views into the flat parameter vector."""
        self.weights, self.biases = [], []
        pos = 0
        for fan_in, fan_out in shapes:
            self.weights.append(self.theta[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
            pos += fan_in * fan_out
            self.biases.append(self.theta[pos:pos + fan_out])
            pos += fan_out

    @property
    def shapes(self) -> list:
        return [w.shape for w in self.weights]

    @property
    def params(self) -> list:
        """Weights and biases interleaved: [W1, b1, W2, b2, ...], as views into ``theta``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def num_params(self) -> int:
        return self.theta.size

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.state_dim:
            raise ValueError(f"expected state encodings of length {self.state_dim}, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("state encoding contains non-finite values")
        return x

    def forward(self, x) -> np.ndarray:
        """Q-values for one state (shape (18,)) or a batch (shape (B, 18))."""
        single = np.ndim(x) == 1
        q, _ = self.forward_cache(x)
        return q[0] if single else q

    def forward_cache(self, x):
        x = self._check_input(x)
        W, b = self.weights, self.biases
        pre = [x @ W[0] + b[0]]
        acts = [x, relu(pre[0])]
        pre.append(acts[-1] @ W[1] + b[1])
        acts.append(relu(pre[-1]))
        for k in range(NUM_BLOCKS):
            i = 2 + 2 * k
            block_in = acts[-1]
            pre.append(block_in @ W[i] + b[i])
            acts.append(relu(pre[-1]))
            pre.append(acts[-1] @ W[i + 1] + b[i + 1] + block_in)
            acts.append(relu(pre[-1]))
        q = acts[-1] @ W[-1] + b[-1]
        return q, (acts, pre)

    def backward(self, cache, dq) -> np.ndarray:
        """Flat gradient (laid out like ``theta``) given dLoss/dQ of shape (B, 18)."""
        acts, pre = cache
        W = self.weights
        grads_w = [None] * len(W)
        grads_b = [None] * len(W)
        grads_w[-1] = acts[-1].T @ dq
        grads_b[-1] = dq.sum(axis=0)
        dh = dq @ W[-1].T
        for k in reversed(range(NUM_BLOCKS)):
            i = 2 + 2 * k
            # acts[i] is the block input, acts[i+1] the inner activation
            du = dh * (pre[i + 1] > 0)
            grads_w[i + 1] = acts[i + 1].T @ du
            grads_b[i + 1] = du.sum(axis=0)
            dz = (du @ W[i + 1].T) * (pre[i] > 0)
            grads_w[i] = acts[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            dh = du + dz @ W[i].T
        for i in (1, 0):
            dz = dh * (pre[i] > 0)
            grads_w[i] = acts[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            if i:
                dh = dz @ W[i].T
        return np.concatenate([g.ravel() for pair in zip(grads_w, grads_b) for g in pair])

    def copy(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.state_dim, other.hidden, other.n_actions = self.state_dim, self.hidden, self.n_actions
        other.theta = self.theta.copy()
        other._bind(self.shapes)
        return other

    def same_architecture(self, other: "QNetwork") -> bool:
        return self.shapes == other.shapes

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "state_dim": self.state_dim,
            "hidden": self.hidden,
            "n_actions": self.n_actions,
            "layers": [
                {"name": name, "weight_shape": list(w.shape), "weight": w.ravel().tolist(), "bias": b.tolist()}
                for name, w, b in zip(LAYER_NAMES, self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QNetwork":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"not a Q-network checkpoint (format={data.get('format')!r})")
        if data.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {data.get('version')}")
        try:
            net = cls(int(data["state_dim"]), int(data["hidden"]), int(data["n_actions"]))
            layers = data["layers"]
            if [layer["name"] for layer in layers] != list(LAYER_NAMES):
                raise CheckpointError("checkpoint layer list does not match the architecture")
            for i, layer in enumerate(layers):
                shape = tuple(layer["weight_shape"])
                if shape != net.weights[i].shape or len(layer["bias"]) != net.biases[i].size:
                    raise CheckpointError(f"layer {layer['name']}: shape {shape} does not match {net.weights[i].shape}")
                net.weights[i][...] = np.array(layer["weight"], dtype=float).reshape(shape)
                net.biases[i][...] = np.array(layer["bias"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CheckpointError):
                raise
            raise CheckpointError(f"malformed checkpoint: {exc!r}") from None
        return net

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "QNetwork":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: {exc}") from None
        return cls.from_dict(data)

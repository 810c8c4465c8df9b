"""Minimal learned x0-predictor: a fully connected net with manual backprop.

The network maps (x_t, y, time embedding) -> x0_hat and is trained with plain
SGD on the mean-squared error against the clean sample, the x0-prediction
form of score matching.  No autograd framework is involved: gradients are
accumulated by hand in reverse order, which keeps the whole train/sample loop
dependency-free and bit-reproducible.

Time enters through a fixed sinusoidal embedding; the activation is tanh
throughout (scores are smooth, so a smooth nonlinearity fits them with few
units).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .errors import TrainingDivergedError
from .processes import ProcessSpec
from .toyworld import ToyWorld

__all__ = ["Mlp", "TrainConfig", "time_embedding", "train", "save_weights", "load_weights"]

_ACTIVATION_IDS = {"tanh": 1}
_DIVERGENCE_LIMIT = 1e6
_WEIGHTS_VERSION = 1


def time_embedding(t, width: int) -> np.ndarray:
    """Sinusoidal features of t in [0, 1]: pairs (sin, cos) at dyadic frequencies."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = width // 2
    freqs = np.pi * 2.0 ** np.arange(half)
    angles = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


@dataclass
class Mlp:
    """Fully connected tanh network; weights[i] has shape (fan_out, fan_in)."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    embed_width: int = 16
    d_state: int = 1
    d_cond: int = 1
    activation: str = "tanh"

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = (64, 64, 64),
        d_state: int = 1,
        d_cond: int = 1,
        embed_width: int = 16,
    ) -> "Mlp":
        sizes = (d_state + d_cond + embed_width, *hidden, d_state)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases, embed_width, d_state, d_cond)

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.embed_width,
            self.d_state,
            self.d_cond,
            self.activation,
        )

    def _features(self, x, t, y) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        emb = time_embedding(t, self.embed_width)
        return np.concatenate([x, np.broadcast_to(y, x.shape), emb], axis=1)

    def _forward_cached(self, feats: np.ndarray):
        acts = [feats]
        h = feats
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            h = z if i == len(self.weights) - 1 else np.tanh(z)
            acts.append(h)
        return h, acts

    def forward(self, x, t, y) -> np.ndarray:
        """Predict x0 for a batch; shape (n, d_state)."""
        out, _ = self._forward_cached(self._features(x, t, y))
        return out

    def loss_and_grad(self, x0, y, t, xt):
        """MSE loss against x0 and its gradient w.r.t. every parameter.

        Raises if the loss is non-finite, reporting the first offending row.
        """
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        feats = self._features(xt, t, y)
        pred, acts = self._forward_cached(feats)
        resid = pred - x0
        per_sample = np.sum(resid**2, axis=1)
        if not np.all(np.isfinite(per_sample)):
            bad = int(np.argwhere(~np.isfinite(per_sample))[0][0])
            raise TrainingDivergedError(f"non-finite loss at batch row {bad}", step=None)
        n = x0.shape[0]
        loss = float(np.mean(per_sample) / x0.shape[1])
        grad_w = [np.zeros_like(w) for w in self.weights]
        grad_b = [np.zeros_like(b) for b in self.biases]
        delta = 2.0 * resid / (n * x0.shape[1])
        for i in reversed(range(len(self.weights))):
            grad_w[i] = delta.T @ acts[i]
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i]) * (1.0 - acts[i] ** 2)
        return loss, (grad_w, grad_b)

    def apply_gradients(self, grads, lr: float) -> None:
        grad_w, grad_b = grads
        for w, gw in zip(self.weights, grad_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grad_b):
            b -= lr * gb


@dataclass(frozen=True)
class TrainConfig:
    spec: ProcessSpec
    world: ToyWorld
    steps: int = 20000
    batch: int = 128
    lr: float = 1e-3
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64, 64)
    embed_width: int = 16
    t_lo: float = 1e-3
    t_hi: float | None = None  # default: the spec's sampling range

    def __post_init__(self):
        if self.steps < 0 or self.batch < 1:
            raise ValueError("need steps >= 0 and batch >= 1")
        if self.lr <= 0:
            raise ValueError("need lr > 0")


def train(cfg: TrainConfig, net: Mlp | None = None, start_step: int = 0):
    """Plain-SGD training loop; returns (net, loss_curve).

    Each step draws a fresh batch: (x0, y) from the world, t uniform over the
    valid range, and x_t from the transition kernel.  With a fixed seed the
    result is bit-identical across runs; resuming from (net, start_step)
    continues the same trajectory.
    """
    spec = cfg.spec
    t_hi = cfg.t_hi if cfg.t_hi is not None else spec.default_t_max()
    if net is None:
        net = Mlp.init(
            streams.substream(cfg.seed, streams.TRAIN_INIT),
            hidden=cfg.hidden,
            embed_width=cfg.embed_width,
        )
    curve: list[float] = []
    for step in range(start_step, start_step + cfg.steps):
        gen = streams.substream(cfg.seed, streams.TRAIN_STEP, step)
        x0, y = cfg.world.sample_pair(gen, cfg.batch)
        t = gen.uniform(cfg.t_lo, t_hi, cfg.batch)
        xt = spec.sample_kernel(x0, y, t, gen)
        try:
            loss, grads = net.loss_and_grad(x0[:, None], y[:, None], t, xt[:, None])
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(str(exc), step=step, last_net=net, curve=curve) from exc
        if loss > _DIVERGENCE_LIMIT:
            raise TrainingDivergedError(
                f"loss {loss:.3e} above divergence limit at step {step}",
                step=step,
                last_net=net,
                curve=curve,
            )
        net.apply_gradients(grads, cfg.lr)
        curve.append(loss)
    return net, curve


def save_weights(net: Mlp, path) -> None:
    """Flat binary container: version/meta header, then row-major float64 blobs."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<BBHH", _WEIGHTS_VERSION, _ACTIVATION_IDS[net.activation],
                             net.embed_width, len(net.layer_sizes)))
        fh.write(struct.pack("<HH", net.d_state, net.d_cond))
        fh.write(struct.pack(f"<{len(net.layer_sizes)}I", *net.layer_sizes))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_weights(path) -> Mlp:
    with open(path, "rb") as fh:
        version, act_id, embed_width, n_sizes = struct.unpack("<BBHH", fh.read(6))
        if version != _WEIGHTS_VERSION:
            raise ValueError(f"unsupported weights version {version}")
        d_state, d_cond = struct.unpack("<HH", fh.read(4))
        sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = np.frombuffer(fh.read(8 * fan_out * fan_in), dtype="<f8").reshape(fan_out, fan_in)
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            weights.append(w.copy())
            biases.append(b.copy())
    activation = {v: k for k, v in _ACTIVATION_IDS.items()}[act_id]
    return Mlp(tuple(sizes), weights, biases, embed_width, d_state, d_cond, activation)

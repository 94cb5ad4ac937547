"""Noise-prediction training loop: plain SGD baseline, adam behind a flag."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .diffusion import forward_noise
from .errors import ConfigError, TrainingError
from .network import DenoiserNet
from .schedule import NoiseSchedule


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    epochs: int = 1000
    batch_size: int = 1024
    learning_rate: float = 1e-4
    seed: int = 0
    optimizer: str = "sgd"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(
                f"learning_rate must be positive, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(
                f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


class _AdamState:
    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step = 0

    def update(self, params, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.step += 1
        for name, g in grads.items():
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / (1 - b1 ** self.step)
            vhat = self.v[name] / (1 - b2 ** self.step)
            params[name] -= lr * mhat / (np.sqrt(vhat) + eps)


def train(net: DenoiserNet, sched: NoiseSchedule, data,
          cfg: TrainConfig) -> list[float]:
    """Fit the denoiser in place; returns the per-epoch mean batch loss.

    Each batch draws one step index and one noise row per data row, forms the
    noised input, and minimises the mean summed squared noise residual.
    Raises TrainingError the moment the loss goes non-finite.
    """
    data = ad.as_matrix(data, "data")
    if data.shape[1] != net.data_dim:
        raise ConfigError(
            f"train: data width {data.shape[1]} != net data_dim "
            f"{net.data_dim}")
    n = data.shape[0]
    rng = np.random.default_rng(cfg.seed)
    adam = _AdamState(net.params) if cfg.optimizer == "adam" else None
    trace: list[float] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            rows = data[order[start:start + cfg.batch_size]]
            b = rows.shape[0]
            t = rng.integers(1, sched.steps + 1, size=b)
            eps = rng.standard_normal(rows.shape)
            x_t = forward_noise(sched, rows, t, eps)

            tape = ad.Tape()
            x_node = tape.constant(x_t, "x_t")
            eps_hat, leaves = net.forward_tape(tape, x_node, t,
                                               params_require_grad=True)
            resid = ad.sub(eps_hat, tape.constant(eps, "eps"))
            loss = ad.scale(ad.sum_all(ad.mul(resid, resid)), 1.0 / b)
            loss_val = float(loss.value[0, 0])
            if not np.isfinite(loss_val):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}")
            grads = tape.backward(loss)
            net.backward_calls += 1

            grad_map = {name: grads.of(leaf) for name, leaf in leaves.items()}
            if adam is None:
                for name, g in grad_map.items():
                    net.params[name] -= cfg.learning_rate * g
            else:
                adam.update(net.params, grad_map, cfg.learning_rate)
            batch_losses.append(loss_val)
        trace.append(float(np.mean(batch_losses)))
    return trace

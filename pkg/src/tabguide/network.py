"""The noise-prediction network: 5 linear layers with swish activations.

The diffusion step enters through a sinusoidal embedding followed by a
2-layer MLP; the result is concatenated onto the data row. ``forward`` is a
plain numpy evaluation; ``forward_tape`` records the identical computation on
a tape so gradients with respect to inputs and/or parameters are available.
Both paths run the same kernels in the same order, so their outputs are
bit-identical.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError

N_LAYERS = 5


def sinusoidal_embedding(t, dim: int) -> np.ndarray:
    """Classic sin/cos positional features of the integer step index."""
    if dim % 2 != 0 or dim < 4:
        raise ConfigError(f"embedding dim must be even and >= 4, got {dim}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64)).reshape(-1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / (half - 1))
    args = t_arr[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


class DenoiserNet:
    """MLP noise predictor with instrumented forward/backward counters."""

    def __init__(self, data_dim: int, hidden_width=1024,
                 time_embed_dim: int = 128, time_mlp_width: int = 1024,
                 seed: int = 0):
        if data_dim < 1:
            raise ConfigError(f"data_dim must be >= 1, got {data_dim}")
        if isinstance(hidden_width, int):
            hidden = (hidden_width,) * (N_LAYERS - 1)
        else:
            hidden = tuple(int(h) for h in hidden_width)
        if len(hidden) != N_LAYERS - 1 or any(h < 1 for h in hidden):
            raise ConfigError(
                f"hidden_width must be an int or {N_LAYERS - 1} positive "
                f"ints, got {hidden_width!r}")
        if time_embed_dim % 2 != 0 or time_embed_dim < 4:
            raise ConfigError(
                f"time_embed_dim must be even and >= 4, got {time_embed_dim}")
        if time_mlp_width < 1:
            raise ConfigError(
                f"time_mlp_width must be >= 1, got {time_mlp_width}")

        self.data_dim = int(data_dim)
        self.hidden_widths = hidden
        self.time_embed_dim = int(time_embed_dim)
        self.time_mlp_width = int(time_mlp_width)
        self.seed = int(seed)
        self.forward_calls = 0
        self.backward_calls = 0

        rng = np.random.default_rng(self.seed)
        self.params: dict[str, np.ndarray] = {}
        self._init_layer(rng, "time_l1", self.time_embed_dim,
                         self.time_mlp_width)
        self._init_layer(rng, "time_l2", self.time_mlp_width,
                         self.time_mlp_width)
        dims = [self.data_dim + self.time_mlp_width, *hidden, self.data_dim]
        for i in range(N_LAYERS):
            self._init_layer(rng, f"lin{i + 1}", dims[i], dims[i + 1])
        self.param_names = list(self.params)

    def _init_layer(self, rng, name: str, fan_in: int, fan_out: int) -> None:
        bound = 1.0 / np.sqrt(fan_in)
        self.params[f"{name}_w"] = rng.uniform(-bound, bound,
                                               (fan_in, fan_out))
        self.params[f"{name}_b"] = np.zeros((1, fan_out))

    def reset_counters(self) -> None:
        self.forward_calls = 0
        self.backward_calls = 0

    def config(self) -> dict:
        return {
            "data_dim": self.data_dim,
            "hidden_width": list(self.hidden_widths),
            "time_embed_dim": self.time_embed_dim,
            "time_mlp_width": self.time_mlp_width,
            "seed": self.seed,
        }

    # -- plain evaluation ---------------------------------------------------

    def _check_input(self, x: np.ndarray) -> None:
        if x.shape[1] != self.data_dim:
            raise ShapeError(
                f"forward: input width {x.shape[1]} != data_dim "
                f"{self.data_dim}")

    def forward(self, x, t) -> np.ndarray:
        """Predict the noise component of ``x`` at step(s) ``t``."""
        x = ad.as_matrix(x, "x")
        self._check_input(x)
        self.forward_calls += 1
        p = self.params
        emb = sinusoidal_embedding(t, self.time_embed_dim)
        if emb.shape[0] == 1 and x.shape[0] > 1:
            emb = np.repeat(emb, x.shape[0], axis=0)
        h = emb @ p["time_l1_w"] + p["time_l1_b"]
        h = h * ad.stable_sigmoid(h)
        temb = h @ p["time_l2_w"] + p["time_l2_b"]
        z = np.concatenate([x, temb], axis=1)
        for i in range(1, N_LAYERS):
            z = z @ p[f"lin{i}_w"] + p[f"lin{i}_b"]
            z = z * ad.stable_sigmoid(z)
        return z @ p[f"lin{N_LAYERS}_w"] + p[f"lin{N_LAYERS}_b"]

    # -- taped evaluation ---------------------------------------------------

    def forward_tape(self, tape: ad.Tape, x_node: ad.Node, t,
                     params_require_grad: bool = True):
        """Record the forward pass; returns (output node, parameter leaves).

        The step embedding does not depend on the data row, so it enters the
        tape as a constant. Pass ``params_require_grad=False`` when only the
        input gradient is needed (guidance), which skips parameter adjoints.
        """
        self._check_input(x_node.value)
        self.forward_calls += 1
        leaves = {
            name: tape.leaf(arr, requires_grad=params_require_grad, name=name)
            for name, arr in self.params.items()
        }
        emb = sinusoidal_embedding(t, self.time_embed_dim)
        if emb.shape[0] == 1 and x_node.value.shape[0] > 1:
            emb = np.repeat(emb, x_node.value.shape[0], axis=0)
        emb_node = tape.constant(emb, "time_embedding")
        h = ad.swish(ad.add(ad.matmul(emb_node, leaves["time_l1_w"]),
                            leaves["time_l1_b"]))
        temb = ad.add(ad.matmul(h, leaves["time_l2_w"]), leaves["time_l2_b"])
        z = ad.concat_cols(x_node, temb)
        for i in range(1, N_LAYERS):
            z = ad.swish(ad.add(ad.matmul(z, leaves[f"lin{i}_w"]),
                                leaves[f"lin{i}_b"]))
        out = ad.add(ad.matmul(z, leaves[f"lin{N_LAYERS}_w"]),
                     leaves[f"lin{N_LAYERS}_b"])
        return out, leaves

"""Constraint-guided ancestral sampling.

Each reverse step runs the denoiser once; that single noise estimate is
reused for the clean-data estimate, the constraint-loss gradient, and the
denoise update. The gradient computed at step t is applied right after the
step lands on t-1, with strength taken from the guidance schedule.

Randomness is organized per row: row i draws from its own generator spawned
as ``SeedSequence(seed).spawn(n)[i]``, first the start state, then one noise
row per step down to t=2. Guided and unguided runs therefore share streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .constraints import ConstraintSpec, check_spec, loss_rows
from .diffusion import denoise_step_from_eps
from .errors import ConfigError, SamplingError
from .network import DenoiserNet
from .schedule import NoiseSchedule

GUIDANCE_SCHEDULES = ("constant", "linear")


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance strength and how it varies over the reverse pass.

    "constant" applies ``eta`` at every step; "linear" ramps from 0 at the
    first (noisiest) step to ``eta`` at the last.
    """

    eta: float = 0.2
    schedule: str = "constant"

    def __post_init__(self):
        if self.eta < 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")
        if self.schedule not in GUIDANCE_SCHEDULES:
            raise ConfigError(
                f"schedule must be one of {GUIDANCE_SCHEDULES}, got "
                f"{self.schedule!r}")

    def strength(self, t: int, steps: int) -> float:
        if self.schedule == "constant":
            return self.eta
        return self.eta * (steps - t) / (steps - 1)


def _gradient_and_eps(net: DenoiserNet, sched: NoiseSchedule,
                      spec: ConstraintSpec, x_t: np.ndarray, t: int):
    """One taped forward: returns (loss gradient in x_t, noise estimate)."""
    tape = ad.Tape()
    x_node = tape.leaf(x_t, name="x_t")
    eps_node, _ = net.forward_tape(tape, x_node, t, params_require_grad=False)
    ab = sched.alpha_bar[t]
    x0_hat = ad.scale(ad.sub(x_node, ad.scale(eps_node, math.sqrt(1.0 - ab))),
                      1.0 / math.sqrt(ab))
    loss = ad.sum_all(loss_rows(spec, x0_hat))
    grads = tape.backward(loss)
    net.backward_calls += 1
    g = grads.of(x_node)
    if not np.isfinite(g).all():
        raise SamplingError(f"non-finite guidance gradient at step {t}")
    return g, eps_node.value


def gradient_and_noise(net: DenoiserNet, sched: NoiseSchedule,
                       spec: ConstraintSpec, x_t, t: int):
    """Constraint-loss gradient and noise estimate from one taped forward.

    Returns ``(gradient, eps_hat)``, both shaped like ``x_t``. Useful when
    the caller also needs the clean-data estimate without a second pass.
    """
    x_t = ad.as_matrix(x_t, "x_t")
    t = sched.check_step(t)
    check_spec(spec, x_t.shape[1])
    return _gradient_and_eps(net, sched, spec, x_t, t)


def guidance_gradient(net: DenoiserNet, sched: NoiseSchedule,
                      spec: ConstraintSpec, x_t, t: int) -> np.ndarray:
    """Gradient of the constraint loss at the clean estimate, taken in x_t.

    Differentiates through the one-shot clean-estimate map and the network.
    """
    g, _ = gradient_and_noise(net, sched, spec, x_t, t)
    return g


def guided_sample(net: DenoiserNet, sched: NoiseSchedule,
                   spec: ConstraintSpec | None, gcfg: GuidanceConfig,
                   n: int, seed: int) -> np.ndarray:
    """Draw n rows, steering each reverse step against the constraint loss.

    With ``spec=None`` or zero strength this is exactly unconditional
    ancestral sampling on the same random streams.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if spec is not None:
        check_spec(spec, net.data_dim)
    d = net.data_dim
    rngs = [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(seed).spawn(n)]
    x = np.stack([rng.standard_normal(d) for rng in rngs])

    for t in range(sched.steps, 0, -1):
        if t > 1:
            z = np.stack([rng.standard_normal(d) for rng in rngs])
        else:
            z = np.zeros_like(x)
        eta_t = gcfg.strength(t, sched.steps) if spec is not None else 0.0
        if eta_t > 0.0:
            g, eps = _gradient_and_eps(net, sched, spec, x, t)
        else:
            g, eps = None, net.forward(x, t)
        x = denoise_step_from_eps(sched, x, t, eps, z)
        if g is not None:
            x = x - eta_t * g
        if not np.isfinite(x).all():
            row = int(np.argwhere(~np.isfinite(x).all(axis=1))[0, 0])
            raise SamplingError(f"non-finite state at step {t}, row {row}")
    return x


def ddpm_sample(net: DenoiserNet, sched: NoiseSchedule, n: int,
                seed: int) -> np.ndarray:
    """Plain unconditional ancestral sampling (guidance off)."""
    return guided_sample(net, sched, None, GuidanceConfig(eta=0.0), n, seed)

"""Noise schedule: per-step signal retention and the derived quantities.

Steps are indexed 1..T. ``alpha_bar`` has length T+1 with ``alpha_bar[0] = 1``
so that the step-1 posterior coefficient is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_STEPS = 200
DEFAULT_ALPHA_FIRST = 0.9999
DEFAULT_ALPHA_LAST = 0.98


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable container for the per-step noise quantities.

    Attributes
    ----------
    steps : total number of diffusion steps T
    alpha : (T+1,) per-step retention, index 0 unused (set to 1)
    alpha_bar : (T+1,) cumulative products, ``alpha_bar[0] == 1``
    sigma : (T+1,) posterior variance used directly as the noise
        multiplier in the reverse step; ``sigma[1] == 0``, index 0 unused
    """

    steps: int
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)

    def check_step(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.steps:
            raise ConfigError(f"step t={t} outside [1, {self.steps}]")
        return t


def build_schedule(steps: int = DEFAULT_STEPS,
                   alpha_first: float = DEFAULT_ALPHA_FIRST,
                   alpha_last: float = DEFAULT_ALPHA_LAST) -> NoiseSchedule:
    """Linear-in-t retention between the two endpoints, then cumprods.

    Raises ConfigError on invalid bounds (need 0 < alpha_last <= alpha_first < 1
    and an integer steps >= 2).
    """
    if int(steps) != steps or steps < 2:
        raise ConfigError(f"steps must be an integer >= 2, got {steps!r}")
    steps = int(steps)
    if not (0.0 < alpha_last <= alpha_first < 1.0):
        raise ConfigError(
            f"need 0 < alpha_last <= alpha_first < 1, got "
            f"({alpha_first}, {alpha_last})")

    alpha = np.ones(steps + 1)
    ts = np.arange(1, steps + 1, dtype=np.float64)
    alpha[1:] = alpha_first + (ts - 1.0) / (steps - 1.0) * (alpha_last -
                                                            alpha_first)
    alpha_bar = np.ones(steps + 1)
    alpha_bar[1:] = np.cumprod(alpha[1:])

    sigma = np.zeros(steps + 1)
    sigma[1:] = (1.0 - alpha[1:]) * (1.0 - alpha_bar[:-1]) / (1.0 -
                                                              alpha_bar[1:])
    out = NoiseSchedule(steps=steps, alpha=alpha, alpha_bar=alpha_bar,
                        sigma=sigma)
    for arr in (out.alpha, out.alpha_bar, out.sigma):
        arr.setflags(write=False)
    return out

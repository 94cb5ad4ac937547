"""Core diffusion algebra: forward noising, clean-data estimates, reverse step.

The reverse step adds ``sigma_t * z`` with ``sigma_t`` the posterior-variance
value itself (not its square root); step 1 adds no noise because
``sigma[1] == 0``.
"""

from __future__ import annotations

import numpy as np

from .autodiff import as_matrix
from .errors import ConfigError, ShapeError
from .schedule import NoiseSchedule


def _resolve_steps(sched: NoiseSchedule, t, n_rows: int) -> np.ndarray:
    """Validate t (scalar or per-row vector) and return it as an (n,) array."""
    t_arr = np.asarray(t)
    if t_arr.ndim == 0:
        t_arr = np.full(n_rows, int(t_arr))
    if t_arr.ndim != 1 or t_arr.shape[0] != n_rows:
        raise ShapeError(
            f"steps: expected scalar or ({n_rows},) vector, got shape "
            f"{np.asarray(t).shape}")
    t_arr = t_arr.astype(np.int64)
    if t_arr.min() < 1 or t_arr.max() > sched.steps:
        raise ConfigError(
            f"step values must lie in [1, {sched.steps}], got range "
            f"[{t_arr.min()}, {t_arr.max()}]")
    return t_arr


def forward_noise(sched: NoiseSchedule, x0, t, eps) -> np.ndarray:
    """x_t = sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps, elementwise."""
    x0 = as_matrix(x0, "x0")
    eps = as_matrix(eps, "eps")
    if eps.shape != x0.shape:
        raise ShapeError(
            f"forward_noise: eps shape {eps.shape} != x0 shape {x0.shape}")
    ab = sched.alpha_bar[_resolve_steps(sched, t, x0.shape[0])][:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def dirty_estimate_from_eps(sched: NoiseSchedule, x_t, t, eps_hat) -> np.ndarray:
    """Invert the forward map around a noise estimate: one-shot x0 guess."""
    x_t = as_matrix(x_t, "x_t")
    eps_hat = as_matrix(eps_hat, "eps_hat")
    if eps_hat.shape != x_t.shape:
        raise ShapeError(
            f"dirty_estimate: eps shape {eps_hat.shape} != x_t shape "
            f"{x_t.shape}")
    ab = sched.alpha_bar[_resolve_steps(sched, t, x_t.shape[0])][:, None]
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def dirty_estimate(net, sched: NoiseSchedule, x_t, t) -> np.ndarray:
    """One-shot clean-data estimate using the network's noise prediction."""
    x_t = as_matrix(x_t, "x_t")
    return dirty_estimate_from_eps(sched, x_t, t, net.forward(x_t, t))


def denoise_step_from_eps(sched: NoiseSchedule, x_t, t: int, eps_hat,
                          z) -> np.ndarray:
    """One reverse step given a noise estimate.

    ``z`` must be zeros when t == 1 (the final step is deterministic).
    """
    x_t = as_matrix(x_t, "x_t")
    eps_hat = as_matrix(eps_hat, "eps_hat")
    z = as_matrix(z, "z")
    if eps_hat.shape != x_t.shape or z.shape != x_t.shape:
        raise ShapeError(
            f"denoise_step: shapes x_t {x_t.shape}, eps {eps_hat.shape}, "
            f"z {z.shape} must all match")
    t = sched.check_step(t)
    if t == 1 and np.any(z != 0.0):
        raise ConfigError("denoise_step: z must be zero at t=1")
    a_t = sched.alpha[t]
    ab_t = sched.alpha_bar[t]
    mean = (x_t - (1.0 - a_t) / np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(a_t)
    return mean + sched.sigma[t] * z


def denoise_step(net, sched: NoiseSchedule, x_t, t: int, z) -> np.ndarray:
    """One reverse step using the network's noise prediction."""
    x_t = as_matrix(x_t, "x_t")
    return denoise_step_from_eps(sched, x_t, t, net.forward(x_t, t), z)

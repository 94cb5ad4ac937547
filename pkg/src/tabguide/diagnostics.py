"""Geometric measurements on denoisers: gradient angles, estimate-projection
errors, and noisy-shell radii, each aggregated over Monte-Carlo draws.

All measurements share one CSV row shape (t, alpha_bar, metric, mean, std, n)
so they can be concatenated into a single table for plotting elsewhere.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .diffusion import dirty_estimate_from_eps, forward_noise
from .errors import ConfigError, UsageError
from .guidance import gradient_and_noise
from .manifolds import AffineSubspace, SyntheticManifold
from .schedule import NoiseSchedule

CSV_COLUMNS = ("t", "alpha_bar", "metric", "mean", "std", "n")


@dataclass(frozen=True)
class DiagnosticRow:
    """One aggregated measurement at one diffusion step."""

    t: int
    alpha_bar: float
    metric: str
    mean: float
    std: float
    n: int


def write_diagnostic_csv(path, rows, provenance: str | None = None) -> None:
    """Write rows in the shared table shape, with an optional provenance
    comment line ahead of the header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if provenance is not None:
            fh.write(f"# provenance: {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([row.t, repr(row.alpha_bar), row.metric,
                             repr(row.mean), repr(row.std), row.n])


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return float("nan"), float("nan")
    return float(values.mean()), float(values.std(ddof=0))


def vector_angles_deg(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise angle in degrees between two stacks of vectors."""
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise ConfigError("angle is undefined for a zero vector")
    cos = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
    return np.degrees(np.arccos(cos))


class ManifoldProjectorDenoiser:
    """Idealized noise model whose clean-data estimate is exactly the
    analytic projection onto the manifold.

    Forward-only: the projection is not expressed in tape primitives, so
    gradient-based guidance cannot run through it. Use
    :class:`AffineProjectorDenoiser` when a differentiable idealized model
    is needed.
    """

    def __init__(self, manifold: SyntheticManifold, sched: NoiseSchedule):
        if manifold.ambient_dim is None:
            raise ConfigError(
                f"{manifold.kind} manifold has no ambient coordinates")
        self.manifold = manifold
        self.sched = sched
        self.data_dim = manifold.ambient_dim
        self.forward_calls = 0
        self.backward_calls = 0

    def reset_counters(self) -> None:
        self.forward_calls = 0
        self.backward_calls = 0

    def forward(self, x, t) -> np.ndarray:
        x = ad.as_matrix(x, "x")
        t = self.sched.check_step(int(t))
        ab = self.sched.alpha_bar[t]
        self.forward_calls += 1
        target = self.manifold.project(x)
        return (x - math.sqrt(ab) * target) / math.sqrt(1.0 - ab)

    def forward_tape(self, tape, x_node, t, params_require_grad=True):
        raise UsageError(
            "projection denoiser is forward-only; use "
            "AffineProjectorDenoiser for gradients")


class AffineProjectorDenoiser:
    """Idealized linear noise model for a flat manifold.

    Its clean-data estimate equals the affine projection exactly, and
    because the map is linear in x the taped forward reproduces the plain
    one bit for bit, with exact gradients.
    """

    def __init__(self, subspace: AffineSubspace, sched: NoiseSchedule):
        if not isinstance(subspace, AffineSubspace):
            raise ConfigError(
                f"expected an AffineSubspace, got {type(subspace).__name__}")
        self.subspace = subspace
        self.sched = sched
        self.data_dim = subspace.ambient_dim
        # x0_hat = x @ P + c (I - P): split into the matrix and row parts.
        frame = subspace.frame
        self._projector = frame.T @ frame
        residual = np.eye(self.data_dim) - self._projector
        self._offset_row = (subspace.offset[None, :] @ residual)
        self.forward_calls = 0
        self.backward_calls = 0

    def reset_counters(self) -> None:
        self.forward_calls = 0
        self.backward_calls = 0

    def _coeffs(self, t) -> tuple[float, float]:
        t = self.sched.check_step(int(t))
        ab = self.sched.alpha_bar[t]
        return math.sqrt(ab), 1.0 / math.sqrt(1.0 - ab)

    def forward(self, x, t) -> np.ndarray:
        x = ad.as_matrix(x, "x")
        root_ab, inv_root = self._coeffs(t)
        self.forward_calls += 1
        target = x @ self._projector + self._offset_row
        return (x - root_ab * target) * inv_root

    def forward_tape(self, tape: ad.Tape, x_node: ad.Node, t,
                     params_require_grad: bool = True):
        root_ab, inv_root = self._coeffs(t)
        self.forward_calls += 1
        target = ad.add(
            ad.matmul(x_node, tape.constant(self._projector,
                                            name="projector")),
            tape.constant(self._offset_row, name="offset_row"))
        out = ad.scale(ad.sub(x_node, ad.scale(target, root_ab)), inv_root)
        return out, {}


def _draw_noised(manifold: SyntheticManifold, sched: NoiseSchedule,
                 n_samples: int, t: int, rng) -> tuple[np.ndarray, np.ndarray]:
    x0 = manifold.sample(n_samples, rng)
    eps = rng.standard_normal(x0.shape)
    return x0, forward_noise(sched, x0, t, eps)


def angle_profile(net, sched: NoiseSchedule, spec,
                  manifold: SyntheticManifold | None, n_samples: int,
                  t_list, seed: int = 0, data: np.ndarray | None = None
                  ) -> list[DiagnosticRow]:
    """Angle between guidance gradients and the normal direction, per step.

    At each step the gradient of the constraint loss is compared with the
    normal at the projection of the clean-data estimate; on-manifold theory
    predicts near-90 degrees. Rows with a zero gradient (or a degenerate
    normal) carry no angle: they are dropped from the ``angle_deg``
    aggregate, whose n column counts only measured rows, and tallied in a
    companion ``angle_excluded`` row per step.

    With ``manifold=None``, rows are drawn from ``data`` and the reference
    direction is the scaled residual ``x_t / sqrt(alpha_bar) - x0_hat``,
    which plays the normal's role when no analytic geometry exists.
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if manifold is None and data is None:
        raise UsageError("need either a manifold or a data matrix")
    if data is not None:
        data = ad.as_matrix(data, "data")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    rows: list[DiagnosticRow] = []
    for t in t_list:
        t = sched.check_step(int(t))
        ab = float(sched.alpha_bar[t])
        if manifold is not None:
            _, x_t = _draw_noised(manifold, sched, n_samples, t, rng)
        else:
            picks = rng.integers(0, data.shape[0], size=n_samples)
            eps = rng.standard_normal((n_samples, data.shape[1]))
            x_t = forward_noise(sched, data[picks], t, eps)
        grad, eps_hat = gradient_and_noise(net, sched, spec, x_t, t)
        x0_hat = dirty_estimate_from_eps(sched, x_t, t, eps_hat)
        if manifold is not None:
            anchor = manifold.project(x0_hat)
            reference = np.empty_like(x_t)
            for i in range(n_samples):
                normal = manifold.normal_basis(anchor[i])
                reference[i] = (x_t[i] - anchor[i]) @ normal.T @ normal
        else:
            reference = x_t / math.sqrt(ab) - x0_hat
        grad_norm = np.linalg.norm(grad, axis=1)
        ref_norm = np.linalg.norm(reference, axis=1)
        keep = (grad_norm > 0.0) & (ref_norm > 0.0)
        if keep.any():
            angles = vector_angles_deg(grad[keep], reference[keep])
        else:
            angles = np.empty(0)
        mean, std = _mean_std(angles)
        rows.append(DiagnosticRow(t, ab, "angle_deg", mean, std,
                                  int(keep.sum())))
        rows.append(DiagnosticRow(t, ab, "angle_excluded",
                                  float(n_samples - keep.sum()), 0.0,
                                  n_samples))
    return rows


def projection_error_profile(net, sched: NoiseSchedule,
                             manifold: SyntheticManifold, n_samples: int,
                             t_list, seed: int = 0) -> list[DiagnosticRow]:
    """Distance between the clean-data estimate and the analytic projection
    of the noised sample, per step."""
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    rows: list[DiagnosticRow] = []
    for t in t_list:
        t = sched.check_step(int(t))
        _, x_t = _draw_noised(manifold, sched, n_samples, t, rng)
        x0_hat = dirty_estimate_from_eps(sched, x_t, t, net.forward(x_t, t))
        errors = np.linalg.norm(x0_hat - manifold.project(x_t), axis=1)
        mean, std = _mean_std(errors)
        rows.append(DiagnosticRow(t, float(sched.alpha_bar[t]),
                                  "projection_error", mean, std, n_samples))
    return rows


@dataclass(frozen=True)
class ShellCheck:
    """Measured vs. predicted distance to the scaled manifold at one step."""

    t: int
    alpha_bar: float
    measured_mean: float
    measured_std: float
    predicted: float
    n: int

    def rows(self) -> list[DiagnosticRow]:
        return [
            DiagnosticRow(self.t, self.alpha_bar, "shell_measured",
                          self.measured_mean, self.measured_std, self.n),
            DiagnosticRow(self.t, self.alpha_bar, "shell_predicted",
                          self.predicted, 0.0, self.n),
        ]


def shell_distance_check(manifold: SyntheticManifold, sched: NoiseSchedule,
                         n_samples: int, t: int, seed: int = 0) -> ShellCheck:
    """Compare the mean distance from noised samples to the scaled manifold
    against sqrt((1 - alpha_bar) * (ambient - intrinsic)).

    The prediction is a concentration statement, so it requires a healthy
    number of normal directions (ambient - intrinsic >= 30).
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if manifold.ambient_dim is None:
        raise ConfigError(
            f"{manifold.kind} manifold has no ambient coordinates")
    codim = manifold.ambient_dim - manifold.intrinsic_dim
    if codim < 30:
        raise ConfigError(
            f"shell check needs ambient - intrinsic >= 30 normal "
            f"directions, got {codim}")
    t = sched.check_step(int(t))
    ab = float(sched.alpha_bar[t])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    _, x_t = _draw_noised(manifold, sched, n_samples, t, rng)
    distances = manifold.distance_to_scaled(x_t, math.sqrt(ab))
    mean, std = _mean_std(distances)
    return ShellCheck(t=t, alpha_bar=ab, measured_mean=mean,
                      measured_std=std,
                      predicted=math.sqrt((1.0 - ab) * codim), n=n_samples)

"""Synthetic data geometries with exact projection and tangent/normal frames.

Circles, spheres, and affine subspaces expose closed-form projections onto
themselves (and onto uniformly scaled copies of themselves, which is what
forward-noised samples concentrate around). The Gaussian-mixture table is a
sampler only: it produces mixed-type rows but has no analytic geometry, and
its geometric methods raise.
"""

from __future__ import annotations

import math

import numpy as np
import pandas as pd

from .errors import ConfigError, NotApplicableError, ShapeError
from .schema import CATEGORICAL, CONTINUOUS, Column, TabularSchema

_RANK_TOL = 1e-10


def default_radius(ambient_dim: int) -> float:
    """Radius scaling that keeps shell predictions testable in high dimension.

    Grows like sqrt(d) so the manifold stays large relative to per-coordinate
    noise even when most ambient directions are normal directions.
    """
    return math.sqrt(ambient_dim)


def _check_points(x, ambient_dim: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != ambient_dim:
        raise ShapeError(
            f"{name}: expected (n, {ambient_dim}) points, got shape "
            f"{np.asarray(x).shape}")
    return np.ascontiguousarray(arr)


def _householder_to(u: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first column is the unit vector u."""
    k = u.shape[0]
    v = u.copy()
    v[0] -= 1.0
    vv = float(v @ v)
    if vv == 0.0:
        return np.eye(k)
    return np.eye(k) - 2.0 * np.outer(v, v) / vv


class SyntheticManifold:
    """Common contract: on-manifold sampling plus exact projection geometry.

    ``project_scaled(x, s)`` returns the closest point on the manifold
    scaled by ``s`` about the origin; ``project`` is the ``s = 1`` case.
    Tangent and normal frames are returned as orthonormal rows.
    """

    kind = "base"
    ambient_dim: int
    intrinsic_dim: int

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def project(self, x) -> np.ndarray:
        return self.project_scaled(x, 1.0)

    def project_scaled(self, x, scale: float) -> np.ndarray:
        raise NotImplementedError

    def distance_to_scaled(self, x, scale: float) -> np.ndarray:
        """Euclidean distance from each row to the scaled manifold."""
        x = _check_points(x, self.ambient_dim, "distance_to_scaled")
        return np.linalg.norm(x - self.project_scaled(x, scale), axis=1)

    def tangent_basis(self, point) -> np.ndarray:
        raise NotImplementedError

    def normal_basis(self, point) -> np.ndarray:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError


class Sphere(SyntheticManifold):
    """Round sphere of the given radius, embedded in the leading coordinates.

    ``sphere_dim`` is the intrinsic dimension, so the sphere spans the first
    ``sphere_dim + 1`` coordinates and all remaining coordinates are zero.
    """

    kind = "sphere"

    def __init__(self, radius: float, ambient_dim: int, sphere_dim: int = 1):
        radius = float(radius)
        ambient_dim = int(ambient_dim)
        sphere_dim = int(sphere_dim)
        if radius <= 0:
            raise ConfigError(f"radius must be > 0, got {radius}")
        if sphere_dim < 1:
            raise ConfigError(f"sphere_dim must be >= 1, got {sphere_dim}")
        if ambient_dim < sphere_dim + 1:
            raise ConfigError(
                f"ambient_dim must be >= sphere_dim + 1, got "
                f"{ambient_dim} < {sphere_dim + 1}")
        self.radius = radius
        self.ambient_dim = ambient_dim
        self.intrinsic_dim = sphere_dim
        self._span = sphere_dim + 1

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        y = rng.standard_normal((n, self._span))
        norms = np.linalg.norm(y, axis=1, keepdims=True)
        while np.any(norms == 0.0):
            bad = np.flatnonzero(norms[:, 0] == 0.0)
            y[bad] = rng.standard_normal((bad.size, self._span))
            norms[bad] = np.linalg.norm(y[bad], axis=1, keepdims=True)
        out = np.zeros((n, self.ambient_dim))
        out[:, :self._span] = self.radius * y / norms
        return out

    def project_scaled(self, x, scale: float) -> np.ndarray:
        if scale <= 0:
            raise ConfigError(f"scale must be > 0, got {scale}")
        x = _check_points(x, self.ambient_dim, "project")
        y = x[:, :self._span]
        norms = np.linalg.norm(y, axis=1, keepdims=True)
        # The center is equidistant from everywhere; break the tie at the
        # first-axis pole so the projection stays a function.
        direction = np.zeros_like(y)
        direction[:, 0] = 1.0
        nz = norms[:, 0] > 0.0
        direction[nz] = y[nz] / norms[nz]
        out = np.zeros_like(x)
        out[:, :self._span] = scale * self.radius * direction
        return out

    def _radial_unit(self, point) -> np.ndarray:
        p = _check_points(point, self.ambient_dim, "point")[0]
        y = p[:self._span]
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise ConfigError(
                "tangent/normal frame is undefined at the center")
        return y / norm

    def tangent_basis(self, point) -> np.ndarray:
        u = self._radial_unit(point)
        frame = _householder_to(u)
        out = np.zeros((self.intrinsic_dim, self.ambient_dim))
        out[:, :self._span] = frame[:, 1:].T
        return out

    def normal_basis(self, point) -> np.ndarray:
        u = self._radial_unit(point)
        out = np.zeros((self.ambient_dim - self.intrinsic_dim,
                        self.ambient_dim))
        out[0, :self._span] = u
        for j in range(self._span, self.ambient_dim):
            out[1 + j - self._span, j] = 1.0
        return out

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "radius": self.radius,
                "ambient_dim": self.ambient_dim,
                "intrinsic_dim": self.intrinsic_dim}


class Circle(Sphere):
    """Circle of the given radius in the first two coordinates."""

    kind = "circle"

    def __init__(self, radius: float, ambient_dim: int = 2):
        super().__init__(radius, ambient_dim, sphere_dim=1)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "radius": self.radius,
                "ambient_dim": self.ambient_dim}


class AffineSubspace(SyntheticManifold):
    """Flat manifold ``offset + span(basis rows)``; empty basis is a point.

    The stored frame is orthonormalized, so ``basis`` rows only need to be
    linearly independent. Samples use standard-normal coefficients times
    ``coeff_scale``.
    """

    kind = "subspace"

    def __init__(self, basis, offset, coeff_scale: float = 1.0):
        offset = np.asarray(offset, dtype=np.float64).reshape(-1)
        basis = np.asarray(basis, dtype=np.float64)
        if basis.size == 0:
            basis = basis.reshape(0, offset.shape[0])
        if basis.ndim != 2 or basis.shape[1] != offset.shape[0]:
            raise ShapeError(
                f"basis: expected (k, {offset.shape[0]}) rows, got shape "
                f"{basis.shape}")
        if coeff_scale <= 0:
            raise ConfigError(f"coeff_scale must be > 0, got {coeff_scale}")
        k, d = basis.shape
        if k >= d:
            raise ConfigError(
                f"basis must leave at least one normal direction, got "
                f"{k} rows in dimension {d}")
        if k > 0:
            gram = basis @ basis.T
            if np.abs(gram - np.eye(k)).max() <= 1e-12:
                # Already orthonormal: keep the rows bit-for-bit so that
                # JSON round trips reproduce the frame exactly.
                frame = basis
            else:
                q, r = np.linalg.qr(basis.T)
                if np.abs(np.diag(r)).min() <= _RANK_TOL * max(
                        1.0, np.abs(r).max()):
                    raise ConfigError("basis rows are linearly dependent")
                frame = q.T
        else:
            frame = basis
        self.ambient_dim = d
        self.intrinsic_dim = k
        self.offset = offset
        self.frame = frame  # orthonormal rows spanning the tangent space
        self.coeff_scale = float(coeff_scale)
        # Complete the tangent frame to a full orthonormal basis; the
        # trailing rows span the normal space.
        full, _ = np.linalg.qr(np.concatenate(
            [frame.T, np.eye(d)], axis=1))
        self._normal_frame = full[:, k:].T

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        coeffs = rng.standard_normal((n, self.intrinsic_dim))
        return self.offset[None, :] + self.coeff_scale * (coeffs @ self.frame)

    def project_scaled(self, x, scale: float) -> np.ndarray:
        if scale <= 0:
            raise ConfigError(f"scale must be > 0, got {scale}")
        x = _check_points(x, self.ambient_dim, "project")
        center = scale * self.offset[None, :]
        shifted = x - center
        return center + (shifted @ self.frame.T) @ self.frame

    def tangent_basis(self, point) -> np.ndarray:
        _check_points(point, self.ambient_dim, "point")
        return self.frame.copy()

    def normal_basis(self, point) -> np.ndarray:
        _check_points(point, self.ambient_dim, "point")
        return self._normal_frame.copy()

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "basis": self.frame.tolist(),
                "offset": self.offset.tolist(),
                "coeff_scale": self.coeff_scale}


class GaussianMixtureTable(SyntheticManifold):
    """Mixed-type table sampler: a Gaussian mixture with per-component
    category distributions.

    Columns are generated per mixture component: continuous columns draw
    from component-specific normals, categorical columns from
    component-specific class probabilities. There is no analytic geometry;
    projection and frame queries raise.
    """

    kind = "mixture"
    ambient_dim = None
    intrinsic_dim = None

    def __init__(self, weights, continuous: dict, categorical: dict):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size < 1:
            raise ConfigError("weights must be a non-empty 1-D sequence")
        if np.any(weights <= 0):
            raise ConfigError("weights must be positive")
        total = weights.sum()
        # Normalize only when needed so construction is idempotent and
        # JSON round trips preserve stored values exactly.
        self.weights = weights if abs(total - 1.0) <= 1e-12 \
            else weights / total
        k = weights.size
        if not continuous and not categorical:
            raise ConfigError("mixture needs at least one column")
        self.continuous = {}
        for name, (means, stds) in continuous.items():
            means = np.asarray(means, dtype=np.float64)
            stds = np.asarray(stds, dtype=np.float64)
            if means.shape != (k,) or stds.shape != (k,):
                raise ShapeError(
                    f"column {name!r}: means/stds must have shape ({k},)")
            if np.any(stds <= 0):
                raise ConfigError(f"column {name!r}: stds must be > 0")
            self.continuous[name] = (means, stds)
        self.categorical = {}
        for name, (levels, probs) in categorical.items():
            levels = tuple(levels)
            probs = np.asarray(probs, dtype=np.float64)
            if len(levels) < 2:
                raise ConfigError(
                    f"column {name!r}: needs >= 2 levels, got {levels}")
            if probs.shape != (k, len(levels)):
                raise ShapeError(
                    f"column {name!r}: probs must have shape "
                    f"({k}, {len(levels)}), got {probs.shape}")
            if np.any(probs < 0):
                raise ConfigError(f"column {name!r}: probs must be >= 0")
            sums = probs.sum(axis=1, keepdims=True)
            if np.any(sums <= 0):
                raise ConfigError(
                    f"column {name!r}: each component needs positive "
                    f"probability mass")
            if np.abs(sums - 1.0).max() > 1e-12:
                probs = probs / sums
            self.categorical[name] = (levels, probs)

    def sample(self, n: int, rng: np.random.Generator) -> pd.DataFrame:
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        comp = rng.choice(self.weights.size, size=n, p=self.weights)
        data = {}
        for name, (means, stds) in self.continuous.items():
            data[name] = rng.normal(means[comp], stds[comp])
        for name, (levels, probs) in self.categorical.items():
            cumulative = np.cumsum(probs, axis=1)[comp]
            draws = rng.random(n)
            idx = (draws[:, None] > cumulative).sum(axis=1)
            idx = np.minimum(idx, len(levels) - 1)
            data[name] = [levels[i] for i in idx]
        return pd.DataFrame(data)

    def schema(self) -> TabularSchema:
        cols = [Column(name, CONTINUOUS) for name in self.continuous]
        cols += [Column(name, CATEGORICAL, cardinality=len(levels))
                 for name, (levels, _) in self.categorical.items()]
        return TabularSchema(columns=tuple(cols))

    def _no_geometry(self):
        raise NotApplicableError(
            "mixture tables have no analytic projection geometry")

    def project_scaled(self, x, scale: float):
        self._no_geometry()

    def distance_to_scaled(self, x, scale: float):
        self._no_geometry()

    def tangent_basis(self, point):
        self._no_geometry()

    def normal_basis(self, point):
        self._no_geometry()

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "continuous": {name: {"means": m.tolist(), "stds": s.tolist()}
                           for name, (m, s) in self.continuous.items()},
            "categorical": {name: {"levels": list(levels),
                                   "probs": p.tolist()}
                            for name, (levels, p) in
                            self.categorical.items()},
        }


def default_mixture() -> GaussianMixtureTable:
    """Small two-component table with two continuous and two categorical
    columns, used as the stock synthetic mixed-type dataset."""
    return GaussianMixtureTable(
        weights=[0.6, 0.4],
        continuous={
            "amount": ([0.0, 3.0], [1.0, 0.5]),
            "score": ([-1.0, 1.0], [0.5, 0.5]),
        },
        categorical={
            "group": (("a", "b", "c"), [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]),
            "flag": (("no", "yes"), [[0.8, 0.2], [0.3, 0.7]]),
        },
    )


def manifold_from_json(doc: dict) -> SyntheticManifold:
    """Rebuild any manifold from its ``to_json_dict`` form."""
    kind = doc.get("kind")
    if kind == "circle":
        return Circle(doc["radius"], doc["ambient_dim"])
    if kind == "sphere":
        return Sphere(doc["radius"], doc["ambient_dim"],
                      doc["intrinsic_dim"])
    if kind == "subspace":
        return AffineSubspace(doc["basis"], doc["offset"],
                              doc.get("coeff_scale", 1.0))
    if kind == "mixture":
        continuous = {name: (spec["means"], spec["stds"])
                      for name, spec in doc["continuous"].items()}
        categorical = {name: (spec["levels"], spec["probs"])
                       for name, spec in doc["categorical"].items()}
        return GaussianMixtureTable(doc["weights"], continuous, categorical)
    raise ConfigError(f"unknown manifold kind {kind!r}")

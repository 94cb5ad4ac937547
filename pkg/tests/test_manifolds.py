"""Synthetic geometries: sampling, exact projection, orthonormal frames."""

import numpy as np
import pytest

from tabguide.errors import ConfigError, NotApplicableError, ShapeError
from tabguide.manifolds import (AffineSubspace, Circle, GaussianMixtureTable,
                                Sphere, default_mixture, default_radius,
                                manifold_from_json)
from tabguide.schema import CATEGORICAL, CONTINUOUS


def test_circle_projection_closed_form():
    circle = Circle(2.0)
    out = circle.project(np.array([[3.0, 4.0]]))
    assert np.allclose(out, [[1.2, 1.6]], atol=1e-12)
    dist = circle.distance_to_scaled(np.array([[3.0, 4.0]]), 1.0)
    assert np.allclose(dist, [3.0], atol=1e-12)


def test_circle_projection_beats_dense_grid():
    # Independent oracle: the analytic projection must match a fine
    # brute-force search over circle angles.
    circle = Circle(1.7, ambient_dim=4)
    rng = np.random.default_rng(5)
    points = rng.standard_normal((20, 4)) * 3.0
    angles = np.linspace(0.0, 2.0 * np.pi, 20001)
    grid = np.zeros((angles.size, 4))
    grid[:, 0] = 1.7 * np.cos(angles)
    grid[:, 1] = 1.7 * np.sin(angles)
    analytic = circle.distance_to_scaled(points, 1.0)
    for i, point in enumerate(points):
        best = np.linalg.norm(grid - point[None, :], axis=1).min()
        assert analytic[i] <= best + 1e-6


def test_circle_center_tie_break_is_deterministic():
    circle = Circle(3.0, ambient_dim=3)
    out = circle.project(np.array([[0.0, 0.0, 5.0]]))
    assert np.allclose(out, [[3.0, 0.0, 0.0]])


def test_sphere_samples_on_sphere_with_zero_padding():
    sphere = Sphere(2.5, ambient_dim=6, sphere_dim=2)
    rng = np.random.default_rng(0)
    x = sphere.sample(200, rng)
    assert x.shape == (200, 6)
    norms = np.linalg.norm(x[:, :3], axis=1)
    assert np.allclose(norms, 2.5, atol=1e-12)
    assert np.all(x[:, 3:] == 0.0)


def test_sphere_scaled_distance_closed_form():
    sphere = Sphere(2.0, ambient_dim=5, sphere_dim=1)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((50, 5)) * 4.0
    scale = 0.6
    radial = np.abs(np.linalg.norm(x[:, :2], axis=1) - scale * 2.0)
    off_plane = np.linalg.norm(x[:, 2:], axis=1)
    expected = np.sqrt(radial ** 2 + off_plane ** 2)
    assert np.allclose(sphere.distance_to_scaled(x, scale), expected,
                       atol=1e-10)


@pytest.mark.parametrize("manifold", [
    Circle(1.0, ambient_dim=5),
    Sphere(3.0, ambient_dim=7, sphere_dim=3),
    AffineSubspace(np.random.default_rng(2).standard_normal((3, 8)),
                   np.arange(8.0)),
])
def test_frames_are_orthonormal_and_orthogonal(manifold):
    rng = np.random.default_rng(7)
    point = manifold.sample(1, rng)[0]
    tangent = manifold.tangent_basis(point)
    normal = manifold.normal_basis(point)
    n, d = manifold.intrinsic_dim, manifold.ambient_dim
    assert tangent.shape == (n, d)
    assert normal.shape == (d - n, d)
    assert np.abs(tangent @ tangent.T - np.eye(n)).max() <= 1e-12
    assert np.abs(normal @ normal.T - np.eye(d - n)).max() <= 1e-12
    assert np.abs(tangent @ normal.T).max() <= 1e-12


def test_circle_tangent_is_rotated_radial():
    circle = Circle(2.0)
    point = np.array([2.0 * np.cos(0.7), 2.0 * np.sin(0.7)])
    tangent = circle.tangent_basis(point)[0]
    radial = point / 2.0
    assert abs(tangent @ radial) <= 1e-12


def test_subspace_orthonormalizes_raw_basis():
    basis = np.array([[2.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]])
    sub = AffineSubspace(basis, np.zeros(4))
    assert np.abs(sub.frame @ sub.frame.T - np.eye(2)).max() <= 1e-12
    # Span is preserved: original rows project onto the frame exactly.
    recon = (basis @ sub.frame.T) @ sub.frame
    assert np.allclose(recon, basis, atol=1e-12)


def test_subspace_projection_is_idempotent_and_orthogonal():
    rng = np.random.default_rng(3)
    sub = AffineSubspace(rng.standard_normal((2, 6)),
                         rng.standard_normal(6))
    x = rng.standard_normal((30, 6)) * 2.0
    proj = sub.project(x)
    assert np.allclose(sub.project(proj), proj, atol=1e-10)
    residual = x - proj
    assert np.abs(residual @ sub.frame.T).max() <= 1e-10


def test_subspace_scaled_projection_shifts_the_offset():
    rng = np.random.default_rng(4)
    offset = np.array([5.0, 0.0, 0.0])
    sub = AffineSubspace(np.array([[0.0, 1.0, 0.0]]), offset)
    x = np.array([[0.0, 2.0, 3.0]])
    half = sub.project_scaled(x, 0.5)
    assert np.allclose(half, [[2.5, 2.0, 0.0]], atol=1e-12)
    assert np.allclose(sub.distance_to_scaled(x, 0.5),
                       [np.sqrt(2.5 ** 2 + 9.0)], atol=1e-12)


def test_point_manifold_distance_is_norm_to_offset():
    point = AffineSubspace(np.zeros((0, 4)), np.array([1.0, 0.0, 0.0, 0.0]))
    assert point.intrinsic_dim == 0
    x = np.array([[2.0, 2.0, 0.0, 0.0]])
    assert np.allclose(point.distance_to_scaled(x, 1.0), [np.sqrt(5.0)])
    assert np.allclose(point.distance_to_scaled(x, 2.0), [2.0])
    assert point.normal_basis(x[0]).shape == (4, 4)


def test_dependent_basis_rows_are_rejected():
    with pytest.raises(ConfigError, match="dependent"):
        AffineSubspace(np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
                       np.zeros(3))


def test_full_dimensional_basis_is_rejected():
    with pytest.raises(ConfigError, match="normal direction"):
        AffineSubspace(np.eye(2), np.zeros(2))


@pytest.mark.parametrize("bad", [
    lambda: Circle(0.0),
    lambda: Circle(1.0, ambient_dim=1),
    lambda: Sphere(1.0, ambient_dim=3, sphere_dim=0),
    lambda: Sphere(1.0, ambient_dim=3, sphere_dim=3),
])
def test_bad_shape_parameters_are_rejected(bad):
    with pytest.raises(ConfigError):
        bad()


def test_projection_rejects_wrong_width():
    with pytest.raises(ShapeError):
        Circle(1.0, ambient_dim=3).project(np.zeros((2, 2)))


def test_sampling_is_deterministic_per_seed():
    sphere = Sphere(1.0, ambient_dim=4, sphere_dim=2)
    a = sphere.sample(64, np.random.default_rng(11))
    b = sphere.sample(64, np.random.default_rng(11))
    assert a.tobytes() == b.tobytes()


def test_default_radius_scales_like_root_dim():
    assert default_radius(100) == 10.0
    assert default_radius(4) == 2.0


def test_mixture_sampling_and_schema():
    mix = default_mixture()
    frame = mix.sample(500, np.random.default_rng(9))
    assert list(frame.columns) == ["amount", "score", "group", "flag"]
    assert set(frame["group"]) <= {"a", "b", "c"}
    assert set(frame["flag"]) <= {"no", "yes"}
    schema = mix.schema()
    assert schema.column("amount").kind == CONTINUOUS
    assert schema.column("group").kind == CATEGORICAL
    assert schema.column("group").cardinality == 3
    again = mix.sample(500, np.random.default_rng(9))
    assert frame.equals(again)


def test_mixture_component_separation_shows_up_in_samples():
    mix = GaussianMixtureTable(
        weights=[0.5, 0.5],
        continuous={"v": ([-10.0, 10.0], [0.1, 0.1])},
        categorical={"c": (("lo", "hi"), [[1.0, 0.0], [0.0, 1.0]])})
    frame = mix.sample(400, np.random.default_rng(2))
    low = frame["v"] < 0
    assert (frame.loc[low, "c"] == "lo").all()
    assert (frame.loc[~low, "c"] == "hi").all()


def test_mixture_has_no_geometry():
    mix = default_mixture()
    with pytest.raises(NotApplicableError):
        mix.project(np.zeros((1, 2)))
    with pytest.raises(NotApplicableError):
        mix.tangent_basis(np.zeros(2))
    with pytest.raises(NotApplicableError):
        mix.distance_to_scaled(np.zeros((1, 2)), 1.0)


def test_mixture_validation_errors():
    with pytest.raises(ConfigError):
        GaussianMixtureTable([1.0], {}, {})
    with pytest.raises(ShapeError):
        GaussianMixtureTable([1.0, 1.0], {"v": ([0.0], [1.0])}, {})
    with pytest.raises(ConfigError):
        GaussianMixtureTable(
            [1.0], {}, {"c": (("only",), [[1.0]])})


@pytest.mark.parametrize("manifold", [
    Circle(2.0, ambient_dim=6),
    Sphere(1.5, ambient_dim=5, sphere_dim=2),
    AffineSubspace(np.random.default_rng(6).standard_normal((2, 5)),
                   np.ones(5), coeff_scale=0.5),
    default_mixture(),
])
def test_json_round_trip(manifold):
    doc = manifold.to_json_dict()
    rebuilt = manifold_from_json(doc)
    assert type(rebuilt) is type(manifold)
    assert rebuilt.to_json_dict() == doc
    if not isinstance(manifold, GaussianMixtureTable):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((10, manifold.ambient_dim))
        assert np.allclose(rebuilt.project(x), manifold.project(x),
                           atol=1e-12)


def test_unknown_manifold_kind_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        manifold_from_json({"kind": "torus"})

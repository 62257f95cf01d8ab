import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwsde.geometry import (
    GeometryError,
    Hyperplane,
    OffSurfaceError,
    ProjectionError,
    Sphere,
)


def fd_jacobian(fn, x, h=1e-6):
    d = x.size
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def fd_hessian(fn, x, h=1e-4):
    d = x.size
    H = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i] = h
            ej[j] = h
            H[i, j] = (fn(x + ei + ej) - fn(x + ei - ej)
                       - fn(x - ei + ej) + fn(x - ei - ej)) / (4 * h * h)
    return H


# ---------------------------------------------------------------------
# hyperplane

def test_plane_normalizes_its_normal():
    plane = Hyperplane(np.array([2.0, 0.0]), 1.0)
    assert np.allclose(plane.normal_vector, [1.0, 0.0])
    # offset is rescaled with the normal, so the level set is unchanged
    assert plane.signed_distance(np.array([2.0, 5.0])) == pytest.approx(1.5)


def test_plane_signed_distance_sides():
    plane = Hyperplane(np.array([1.0, 0.0]), 0.0)
    assert plane.signed_distance(np.array([0.3, -2.0])) == pytest.approx(0.3)
    assert plane.signed_distance(np.array([-0.3, 7.0])) == pytest.approx(-0.3)
    assert plane.distance(np.array([-0.3, 7.0])) == pytest.approx(0.3)


def test_plane_project_and_normal():
    plane = Hyperplane(np.array([0.0, 1.0]), 2.0)
    x = np.array([5.0, 7.0])
    p = plane.project(x)
    assert np.allclose(p, [5.0, 2.0])
    n = plane.unit_normal(p)
    assert np.allclose(n, [0.0, 1.0])


def test_plane_curvature_is_zero():
    plane = Hyperplane(np.array([1.0, 1.0]), 0.0)
    x = np.array([0.2, -0.1])
    assert np.allclose(plane.distance_hessian(x), 0.0)
    v = np.array([1.0, 2.0])
    assert np.allclose(plane.projection_hessian_bilinear(x, v, v), 0.0)
    P = plane.projection_jacobian(x)
    n = plane.normal_vector
    assert np.allclose(P, np.eye(2) - np.outer(n, n))
    assert plane.reach == np.inf


def test_plane_rejects_zero_normal():
    with pytest.raises(GeometryError):
        Hyperplane(np.zeros(3), 1.0)


def test_unit_normal_requires_surface_point():
    plane = Hyperplane(np.array([1.0, 0.0]), 0.0)
    with pytest.raises(OffSurfaceError):
        plane.unit_normal(np.array([0.5, 0.0]))


# ---------------------------------------------------------------------
# sphere

def test_sphere_trivia():
    sphere = Sphere(np.zeros(2), 1.0)
    assert np.allclose(sphere.project(np.array([2.0, 0.0])), [1.0, 0.0])
    assert sphere.signed_distance(np.array([2.0, 0.0])) == pytest.approx(1.0)
    # interior points are on the negative side
    assert sphere.signed_distance(np.array([0.25, 0.0])) == pytest.approx(-0.75)
    assert sphere.reach == 1.0


def test_sphere_center_has_no_projection():
    sphere = Sphere(np.array([1.0, -1.0]), 2.0)
    with pytest.raises(ProjectionError):
        sphere.project(np.array([1.0, -1.0]))


def test_sphere_in_tube():
    sphere = Sphere(np.zeros(2), 1.0)
    pts = np.array([[1.05, 0.0], [0.0, 0.8], [3.0, 0.0]])
    assert list(sphere.in_tube(pts, 0.1)) == [True, False, False]


def test_sphere_projection_jacobian_matches_fd(rng):
    sphere = Sphere(np.array([0.5, -0.5, 0.0]), 2.0)
    for _ in range(10):
        x = sphere.center + rng.normal(size=3)
        if np.linalg.norm(x - sphere.center) < 0.3:
            continue
        P = sphere.projection_jacobian(x)
        assert np.allclose(P, fd_jacobian(sphere.project, x), atol=1e-6)


def test_sphere_distance_hessian_matches_fd(rng):
    sphere = Sphere(np.zeros(3), 1.5)
    for _ in range(10):
        x = rng.normal(size=3) * 2.0
        if np.linalg.norm(x) < 0.3:
            continue
        H = sphere.distance_hessian(x)
        assert np.allclose(H, fd_hessian(sphere.signed_distance, x), atol=1e-5)


def test_sphere_projection_hessian_contract_matches_bilinear(rng):
    sphere = Sphere(np.zeros(2), 1.0)
    x = np.array([1.3, 0.4])
    v = rng.normal(size=2)
    w = rng.normal(size=2)
    bil = sphere.projection_hessian_bilinear(x, v, w)
    contracted = sphere.projection_hessian_contract(x, np.outer(v, w))
    assert np.allclose(bil, contracted)


def test_sphere_projection_hessian_bilinear_matches_fd(rng):
    sphere = Sphere(np.zeros(3), 1.0)
    x = np.array([1.2, 0.3, -0.4])
    for _ in range(5):
        v = rng.normal(size=3)
        # directional second derivative of the projection along v
        h = 1e-4
        second = (sphere.project(x + h * v) - 2 * sphere.project(x)
                  + sphere.project(x - h * v)) / h**2
        assert np.allclose(sphere.projection_hessian_bilinear(x, v, v), second, atol=1e-4)


def test_batch_and_single_agree():
    sphere = Sphere(np.zeros(2), 1.0)
    pts = np.array([[1.5, 0.2], [0.4, 0.1], [-2.0, 0.3]])
    batch = sphere.project(pts)
    for i, x in enumerate(pts):
        assert np.array_equal(batch[i], sphere.project(x))
    assert np.array_equal(
        sphere.signed_distance(pts),
        np.array([sphere.signed_distance(x) for x in pts]),
    )


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.floats(-3, 3),
    st.floats(0.4, 2.5),
)
def test_projection_properties_sphere(xs, cx, radius):
    sphere = Sphere(np.array([cx, 0.0]), radius)
    x = np.asarray(xs)
    if np.linalg.norm(x - sphere.center) < 1e-3:
        return
    p = sphere.project(x)
    # projection lands on the surface and is idempotent
    assert abs(sphere.signed_distance(p)) < 1e-9
    assert np.allclose(sphere.project(p), p, atol=1e-9)
    # distance to the surface equals distance to the projection
    assert sphere.distance(x) == pytest.approx(np.linalg.norm(x - p), abs=1e-9)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirwalk.geometry import (Cone, Face, Plane2, Rectangle, angle_ccw, basis,
                              cone_contains, exit_face, perp, project, rect_contains)

coord = st.floats(-100, 100, allow_nan=False)
vec2 = st.tuples(coord, coord)


def test_project_onto_coordinate_plane():
    plane = Plane2.coordinate(3)
    np.testing.assert_array_equal(project(plane, [3, 4, 5]), [3, 4, 0])
    np.testing.assert_array_equal(project(plane, [0, 0, 0]), [0, 0, 0])


def test_project_dimension_mismatch():
    with pytest.raises(ValueError):
        project(Plane2.coordinate(3), [1.0, 2.0])


@given(st.tuples(coord, coord, coord), st.floats(0, 2 * math.pi))
def test_project_pythagoras_and_idempotent(x, theta):
    u1 = np.array([math.cos(theta), math.sin(theta), 0.0])
    u2 = np.array([0.0, 0.0, 1.0])
    plane = Plane2(u1, u2)
    x = np.array(x)
    px = project(plane, x)
    assert abs(px @ px + (x - px) @ (x - px) - x @ x) <= 1e-9 * max(1.0, x @ x)
    np.testing.assert_allclose(project(plane, px), px, atol=1e-9)
    assert px @ px <= x @ x + 1e-9


def test_plane_rejects_non_orthogonal_basis():
    with pytest.raises(ValueError):
        Plane2([1.0, 0.0], [math.sqrt(0.5), math.sqrt(0.5)])


def test_cone_examples():
    cone = Cone(0.5, (1, 0))
    assert cone_contains(cone, [0.0, 0.0])
    assert cone_contains(cone, [1.0, 0.0])
    assert cone_contains(cone, [0.5, 0.5 * math.sqrt(3.0) - 1e-12])
    assert not cone_contains(cone, [0.0, 1.0])
    assert not cone_contains(cone, [-1.0, 0.0])


def test_cone_boundary_is_included():
    # (3, 4) has cosine exactly 3/5 with e1
    assert cone_contains(Cone(0.6, (1, 0)), [3.0, 4.0])


def test_cone_out_of_plane_vectors():
    cone = Cone(0.9, (1, 0, 0), Plane2.coordinate(3))
    assert cone_contains(cone, [0.0, 0.0, 7.0])
    assert not cone_contains(cone, [0.0, 1.0, 7.0])


@pytest.mark.parametrize("u", [0.0, 1.5, -2.0])
def test_cone_rejects_bad_u(u):
    with pytest.raises(ValueError):
        Cone(u, (1, 0))


def test_cone_rejects_direction_outside_plane():
    with pytest.raises(ValueError):
        Cone(0.5, (0, 0, 1), Plane2.coordinate(3))


def test_cone_value_equality():
    assert Cone(0.5, (1, 0)) == Cone(0.5, np.array([1.0, 0.0]))
    assert hash(Cone(0.5, (1, 0))) == hash(Cone(0.5, [1, 0]))
    assert Cone(0.5, (1, 0)) != Cone(0.5, (0, 1))


@given(st.floats(0.01, 1.0), st.floats(0, 2 * math.pi), vec2)
def test_cone_and_complement_cover_plane(u, theta, x):
    cone = Cone(u, (math.cos(theta), math.sin(theta)))
    assert cone_contains(cone, x) or cone_contains(cone.complement(), x)


def test_reversed_cone():
    r = Cone(0.5, (1, 0)).reversed()
    assert r.u == 0.5 and r.ell.tolist() == [-1.0, 0.0]


def test_angle_ccw_examples():
    e1, e2 = basis(0), basis(1)
    assert angle_ccw(e1, e2) == pytest.approx(math.pi / 2)
    assert angle_ccw([0, 0], e1) == 0.0
    assert angle_ccw(e1, -e2) == pytest.approx(3 * math.pi / 2)
    assert angle_ccw(e1, e1) == 0.0


@given(vec2, vec2)
def test_angle_ccw_antisymmetry(x, y):
    x, y = np.array(x), np.array(y)
    cross = x[0] * y[1] - x[1] * y[0]
    if np.linalg.norm(x) < 1e-3 or np.linalg.norm(y) < 1e-3 or abs(cross) < 1e-6:
        return
    total = angle_ccw(x, y) + angle_ccw(y, x)
    assert total == pytest.approx(2 * math.pi, abs=1e-9)


def test_perp_examples():
    np.testing.assert_array_equal(perp([1.0, 0.0]), [0.0, 1.0])
    np.testing.assert_array_equal(perp([0.0, 1.0]), [-1.0, 0.0])


@given(st.floats(0, 2 * math.pi))
def test_perp_is_orthonormal(theta):
    v = np.array([math.cos(theta), math.sin(theta)])
    w = perp(v)
    assert abs(w @ v) < 1e-15
    assert abs(np.linalg.norm(w) - 1.0) < 1e-15


def test_rect_contains_examples():
    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 10)
    assert rect_contains(rect, (0, 0))
    assert not rect_contains(rect, (-10, 0))
    assert not rect_contains(rect, (10, 0))
    assert not rect_contains(rect, (0, 10))
    assert rect_contains(rect, (5, 9.99))


def test_rectangle_validation():
    with pytest.raises(ValueError):
        Rectangle((0, 0), (1, 0), 0, 1, 1, 10)
    with pytest.raises(ValueError):
        Rectangle((0, 0), (1, 1), 1, 1, 1, 10)


def test_exit_face_examples():
    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 10)
    assert exit_face(rect, (-9.5, 0), (-10.5, 0)) is Face.LEFT
    assert exit_face(rect, (9.5, 0), (10.5, 0)) is Face.OTHER
    assert exit_face(rect, (-9.9, 9.9), (-10.1, 10.1)) is Face.LEFT
    assert exit_face(rect, (-9.9, 9.9), (-9.9, 10.1)) is Face.OTHER
    # landing exactly on the left face counts as leaving through it
    assert exit_face(rect, (-9, 0), (-10, 0)) is Face.LEFT
    # crossing the left line outside the face
    assert exit_face(rect, (-9.5, 9.9), (-10.5, 10.5)) is Face.OTHER


def test_exit_face_preconditions():
    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 10)
    with pytest.raises(ValueError):
        exit_face(rect, (-11, 0), (-12, 0))
    with pytest.raises(ValueError):
        exit_face(rect, (0, 0), (1, 0))


@settings(max_examples=200)
@given(st.floats(0, 2 * math.pi), st.floats(-9.9, 9.9), st.floats(-9.9, 9.9),
       st.floats(0, 2 * math.pi), st.floats(0.5, 3.0))
def test_exit_face_rotation_invariant(phi, s0, t0, heading, length):
    base = Rectangle((0, 0), (1, 0), 1, 1, 1, 10)
    p0 = np.array([s0, t0])
    p1 = p0 + length * np.array([math.cos(heading), math.sin(heading)])
    if rect_contains(base, p1):
        return
    # stay clear of the face line and its endpoints so rounding cannot flip the answer
    if min(abs(p1[0] + 10), abs(p1[1] - 10), abs(p1[1] + 10)) < 1e-6:
        return
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    anchor = np.array([3.0, -2.0])
    rect = Rectangle(anchor, rot @ np.array([1.0, 0.0]), 1, 1, 1, 10)
    q0, q1 = anchor + rot @ p0, anchor + rot @ p1
    if not rect_contains(rect, q0) or rect_contains(rect, q1):
        return
    if p1[0] < -10:
        t = p0[1] + (p1[1] - p0[1]) * (-10 - p0[0]) / (p1[0] - p0[0])
        if abs(abs(t) - 10) < 1e-6:
            return
    assert exit_face(rect, q0, q1) is exit_face(base, p0, p1)

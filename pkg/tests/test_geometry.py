import math

import numpy as np
import pytest

from tetherpoc.errors import DegenerateEncounter, DegenerateOrbit, NonSymmetric
from tetherpoc.geometry import (
    RtnFrame,
    build_encounter_frame,
    build_rtn,
    planar_ellipse_q,
    project_covariance,
    project_point,
    radial_direction_u,
)

TOL = 1e-12


def assert_orthonormal_right_handed(a, b, c):
    for v in (a, b, c):
        assert abs(np.linalg.norm(v) - 1) <= TOL
    for u, v in ((a, b), (b, c), (a, c)):
        assert abs(u @ v) <= TOL
    np.testing.assert_allclose(np.cross(a, b), c, atol=TOL)


def test_axis_aligned_encounter_frame():
    f = build_encounter_frame((7500, 0, 0), (0, 7500, 0), (0, 0, 0))
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(f.i, [-s, s, 0], atol=TOL)
    np.testing.assert_allclose(f.j, [0, 0, -1], atol=TOL)
    np.testing.assert_allclose(f.k, [-s, -s, 0], atol=TOL)


@pytest.mark.parametrize("v_s", [(7500, 0, 0), (15000, 0, 0), (-7500, 0, 0)])
def test_parallel_or_equal_velocities_are_degenerate(v_s):
    with pytest.raises(DegenerateEncounter):
        build_encounter_frame((7500, 0, 0), v_s, (0, 0, 0))


def test_random_encounter_frames_are_orthonormal():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        v_p, v_s = rng.normal(0, 7500, (2, 3))
        f = build_encounter_frame(v_p, v_s, rng.normal(0, 7e6, 3))
        assert_orthonormal_right_handed(f.i, f.j, f.k)
        rel = (v_s - v_p) / np.linalg.norm(v_s - v_p)
        np.testing.assert_allclose(f.i, rel, atol=TOL)


def test_circular_equatorial_rtn():
    rtn = build_rtn((7e6, 0, 0), (0, 7.5e3, 0))
    np.testing.assert_allclose(rtn.R, [1, 0, 0], atol=TOL)
    np.testing.assert_allclose(rtn.T, [0, 1, 0], atol=TOL)
    np.testing.assert_allclose(rtn.N, [0, 0, 1], atol=TOL)


def test_parallel_state_is_degenerate_orbit():
    with pytest.raises(DegenerateOrbit):
        build_rtn((7e6, 0, 0), (1e3, 0, 0))


def test_random_rtn_frames_are_orthonormal():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        r = rng.normal(size=3)
        r *= 6.9e6 / np.linalg.norm(r)
        v = rng.normal(0, 7.5e3, 3)
        rtn = build_rtn(r, v)
        assert_orthonormal_right_handed(rtn.R, rtn.T, rtn.N)


def test_project_point_examples():
    f = build_encounter_frame((7500, 0, 0), (0, 7500, 0), (1.0, 2.0, 3.0))
    np.testing.assert_allclose(project_point(f, f.origin), [0, 0], atol=TOL)
    np.testing.assert_allclose(project_point(f, f.origin + 5 * f.j), [5, 0], atol=1e-9)
    for c in (-1e4, 3.0, 7e5):
        np.testing.assert_allclose(project_point(f, f.origin + c * f.i), [0, 0], atol=1e-9)


def test_project_point_is_affine():
    rng = np.random.default_rng(2)
    f = build_encounter_frame(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
    for _ in range(200):
        x, y = rng.normal(0, 1e4, (2, 3))
        a = rng.uniform(-2, 3)
        lhs = project_point(f, a * x + (1 - a) * y)
        rhs = a * project_point(f, x) + (1 - a) * project_point(f, y)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * 1e4)


def test_project_covariance_examples():
    f = build_encounter_frame((7500, 100, -30), (-200, 7400, 900), (0, 0, 0))
    np.testing.assert_allclose(project_covariance(f, np.eye(3)), np.eye(2), atol=1e-12)
    np.testing.assert_allclose(project_covariance(f, 400 * np.eye(3)), 400 * np.eye(2), atol=1e-9)
    np.testing.assert_allclose(project_covariance(f, 1e6 * np.outer(f.i, f.i)), np.zeros((2, 2)), atol=1e-6)


def test_project_covariance_rejects_asymmetric():
    s = np.eye(3)
    s[0, 1] = 1e-3
    f = build_encounter_frame((1, 0, 0), (0, 1, 0))
    with pytest.raises(NonSymmetric):
        project_covariance(f, s)


def test_project_covariance_preserves_psd():
    rng = np.random.default_rng(3)
    for _ in range(300):
        f = build_encounter_frame(rng.normal(size=3), rng.normal(size=3))
        a = rng.normal(size=(3, 3)) * rng.uniform(1, 1e3, 3)
        out = project_covariance(f, a @ a.T)
        assert np.linalg.eigvalsh(out)[0] >= -1e-9 * np.trace(out)


def _frame_with_axes(j, k):
    j, k = np.asarray(j, float), np.asarray(k, float)
    from tetherpoc.geometry import EncounterFrame

    return EncounterFrame(np.cross(j, k), j, k, np.zeros(3))


def test_q_identity_when_orbital_plane_is_conjunction_plane():
    f = _frame_with_axes((1, 0, 0), (0, 1, 0))
    rtn = RtnFrame(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))
    np.testing.assert_allclose(planar_ellipse_q(f, rtn, 4000), 4000**2 * np.eye(2), atol=1e-6)


def test_q_rank_one_when_orbital_plane_is_edge_on():
    # R along j, T along i (dropped): the plane projects onto the j axis only.
    f = _frame_with_axes((1, 0, 0), (0, 1, 0))
    rtn = RtnFrame(np.array([1.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, -1.0, 0]))
    q = planar_ellipse_q(f, rtn, 4000)
    assert np.linalg.matrix_rank(q, tol=1e-6) == 1


def test_q_eigenvalues_and_radial_norm_bounded():
    rng = np.random.default_rng(4)
    for _ in range(500):
        f = build_encounter_frame(rng.normal(size=3), rng.normal(size=3))
        r = rng.normal(size=3)
        rtn = build_rtn(r, rng.normal(size=3))
        ev = np.linalg.eigvalsh(planar_ellipse_q(f, rtn, 4000.0))
        assert ev[0] >= -1e-6 and ev[1] <= 4000.0**2 * (1 + 1e-12)
        assert np.linalg.norm(radial_direction_u(f, rtn)) <= 1 + 1e-12


def test_radial_direction_examples():
    f = _frame_with_axes((1, 0, 0), (0, 1, 0))
    along_j = RtnFrame(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))
    np.testing.assert_allclose(radial_direction_u(f, along_j), [1, 0], atol=TOL)
    along_i = RtnFrame(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    np.testing.assert_allclose(radial_direction_u(f, along_i), [0, 0], atol=TOL)

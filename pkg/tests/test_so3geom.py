import math

import numpy as np
import pytest

from spinchaos.so3geom import (
    EulerPoint,
    decompose_gradient,
    embed,
    euler_to_matrices,
    euler_to_matrix,
    fiber_base_point,
    fiber_points,
    gram,
    gram_det,
    gram_inverse_reference,
    horizontal_components,
    matrix_embedding,
    matrix_to_euler,
    project,
    rotation_about_y,
    rotation_about_z,
)


def random_points(rng, n):
    return [EulerPoint(rng.uniform(-math.pi, math.pi),
                       rng.uniform(0.05, math.pi - 0.05),
                       rng.uniform(-math.pi, math.pi)) for _ in range(n)]


def test_euler_point_validation():
    EulerPoint(0.0, 1.0, -3.0)
    with pytest.raises(ValueError):
        EulerPoint(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        EulerPoint(0.0, math.pi, 0.0)
    with pytest.raises(ValueError):
        EulerPoint(4.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        EulerPoint(0.0, 1.0, -3.5)


def test_euler_point_wrapped():
    p = EulerPoint.wrapped(3.0 * math.pi + 0.25, 1.0, -5.0 * math.pi)
    assert math.isclose(p.phi, -math.pi + 0.25, abs_tol=1e-12)
    assert math.isclose(p.psi, -math.pi, abs_tol=1e-12)


def test_euler_to_matrix_composition():
    rng = np.random.default_rng(11)
    for p in random_points(rng, 8):
        want = rotation_about_z(p.phi) @ rotation_about_y(p.theta) @ rotation_about_z(p.psi)
        got = euler_to_matrix(p)
        np.testing.assert_allclose(got, want, atol=1e-14)
        assert math.isclose(np.linalg.det(got), 1.0, abs_tol=1e-12)
        np.testing.assert_allclose(got.T @ got, np.eye(3), atol=1e-13)


def test_euler_to_matrices_batch():
    rng = np.random.default_rng(12)
    pts = random_points(rng, 20)
    phis = np.array([p.phi for p in pts])
    thetas = np.array([p.theta for p in pts])
    psis = np.array([p.psi for p in pts])
    batch = euler_to_matrices(phis, thetas, psis)
    assert batch.shape == (20, 3, 3)
    for k, p in enumerate(pts):
        np.testing.assert_allclose(batch[k], euler_to_matrix(p), atol=1e-14)


def test_matrix_to_euler_roundtrip():
    rng = np.random.default_rng(13)
    for p in random_points(rng, 25):
        q = matrix_to_euler(euler_to_matrix(p))
        assert math.isclose(p.phi, q.phi, abs_tol=1e-12)
        assert math.isclose(p.theta, q.theta, abs_tol=1e-12)
        assert math.isclose(p.psi, q.psi, abs_tol=1e-12)


def test_matrix_to_euler_rejects_bad_input():
    with pytest.raises(ValueError):
        matrix_to_euler(np.eye(3) * 1.001)
    refl = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        matrix_to_euler(refl)
    pole = rotation_about_z(0.4) @ rotation_about_y(1e-12)
    with pytest.raises(ValueError):
        matrix_to_euler(pole)


def test_project_matches_matrix_column():
    rng = np.random.default_rng(14)
    for p in random_points(rng, 10):
        x = project(p)
        np.testing.assert_allclose(x, euler_to_matrix(p)[:, 2], atol=1e-14)
        assert math.isclose(np.linalg.norm(x), 1.0, abs_tol=1e-13)


def test_embed_norm_and_fiber_circle():
    rng = np.random.default_rng(15)
    for p in random_points(rng, 6):
        v = embed(p)
        assert v.shape == (6,)
        assert math.isclose(v @ v, 2.0, abs_tol=1e-12)
    # along a fiber the last three coordinates freeze and the first three
    # trace a unit circle
    x = np.array([0.3, -0.5, math.sqrt(1.0 - 0.09 - 0.25)])
    pts = fiber_points(x, 8)
    embs = np.array([embed(p) for p in pts])
    np.testing.assert_allclose(embs[:, 3:] - embs[0, 3:], 0.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(embs[:, :3], axis=1), 1.0, atol=1e-12)
    for i in range(8):
        for j in range(8):
            dpsi = pts[i].psi - pts[j].psi
            assert math.isclose(embs[i, :3] @ embs[j, :3], math.cos(dpsi), abs_tol=1e-12)


def test_fiber_points_project_back():
    x = np.array([-0.1, 0.7, math.sqrt(1.0 - 0.01 - 0.49)])
    for p in fiber_points(x, 5):
        np.testing.assert_allclose(project(p), x, atol=1e-12)
    assert fiber_base_point(x).psi == 0.0
    with pytest.raises(ValueError):
        fiber_base_point(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        fiber_base_point(np.array([0.0, 0.0, 2.0]))


def test_matrix_embedding_chords_match_gram():
    # |matrix_embedding(p + h d) - matrix_embedding(p)| ~ h sqrt(d^T G d)
    rng = np.random.default_rng(16)
    h = 1e-5
    for p in random_points(rng, 10):
        d = rng.standard_normal(3)
        q = EulerPoint(p.phi + h * d[0], p.theta + h * d[1], p.psi + h * d[2])
        chord = np.linalg.norm(matrix_embedding(q) - matrix_embedding(p))
        G = gram(p.theta, 1.0, 1.0)
        want = h * math.sqrt(d @ G @ d)
        assert abs(chord / want - 1.0) < 1e-4, (p, d)


def test_fiber_polygon_length_is_two_pi():
    x = np.array([0.48, 0.6, math.sqrt(1.0 - 0.48 ** 2 - 0.36)])
    k = 256
    pts = fiber_points(x, k)
    embs = np.array([matrix_embedding(p) for p in pts])
    length = np.linalg.norm(np.roll(embs, -1, axis=0) - embs, axis=1).sum()
    assert abs(length - 2.0 * math.pi) < 1e-3


def test_gram_entries_and_det():
    rng = np.random.default_rng(17)
    for _ in range(6):
        th = rng.uniform(0.1, math.pi - 0.1)
        xi = rng.uniform(0.5, 12.0)
        s = float(rng.integers(0, 5))
        G = gram(th, xi, s)
        st, ct = math.sin(th), math.cos(th)
        want = np.array([
            [xi * xi * st * st + s * s * ct * ct, 0.0, s * s * ct],
            [0.0, xi * xi, 0.0],
            [s * s * ct, 0.0, s * s],
        ])
        np.testing.assert_allclose(G, want, atol=1e-13)
        assert math.isclose(np.linalg.det(G), gram_det(th, xi, s),
                            rel_tol=1e-10, abs_tol=1e-12)
    ref = gram(1.1, 1.0, 1.0)
    np.testing.assert_allclose(
        ref, [[1.0, 0.0, math.cos(1.1)], [0.0, 1.0, 0.0], [math.cos(1.1), 0.0, 1.0]],
        atol=1e-14)
    np.testing.assert_allclose(gram_inverse_reference(1.1) @ ref, np.eye(3), atol=1e-13)


def test_decompose_gradient_example():
    v, h, w = decompose_gradient((0.0, 0.0, 1.7), math.pi / 2.0, 3.0, 2.0)
    assert v == 1.7
    assert abs(h) < 1e-15
    assert math.isclose(w, 2.0 * 1.7, rel_tol=1e-14)


def test_decompose_gradient_identities():
    rng = np.random.default_rng(18)
    for _ in range(12):
        th = rng.uniform(0.1, math.pi - 0.1)
        xi = rng.uniform(0.5, 11.0)
        s = float(rng.integers(0, 4))
        d = rng.standard_normal(3)
        v, h, w = decompose_gradient(d, th, xi, s)
        assert v == d[2]
        h1, h2 = horizontal_components(d, th)
        assert math.isclose(h * h, h1 * h1 + h2 * h2, rel_tol=1e-12, abs_tol=1e-14)
        # reference-metric squared norm splits into horizontal + vertical
        Gi = gram_inverse_reference(th)
        assert math.isclose(d @ Gi @ d, h * h + v * v, rel_tol=1e-10, abs_tol=1e-12)
        # weighted norm is the G^-1-sandwiched quadratic form of the scaled metric
        sandwich = d @ Gi @ gram(th, xi, s) @ Gi @ d
        assert math.isclose(w * w, sandwich, rel_tol=1e-10, abs_tol=1e-12)

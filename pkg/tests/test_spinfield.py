import math

import numpy as np
import pytest

from spinchaos.so3geom import (
    EulerPoint,
    euler_to_matrix,
    fiber_base_point,
    horizontal_components,
    matrix_to_euler,
    rotation_about_z,
)
from spinchaos.spinfield import (
    MAX_DEGREE,
    FieldRealization,
    SpectralProfile,
    covariance,
    evaluate,
    evaluate_grid,
    evaluate_many,
    horizontal_gradient_invariants,
    horizontal_norm,
    jet,
    jet_many,
    rotate,
    sample,
    spin_norm,
    wigner_d,
    wigner_d_column,
    wigner_d_column_deriv,
    wigner_d_matrix,
)

PROFILE = SpectralProfile.single_band(2, 15)


def random_points(rng, n):
    return [EulerPoint(rng.uniform(-math.pi, math.pi),
                       rng.uniform(0.1, math.pi - 0.1),
                       rng.uniform(-math.pi, math.pi)) for _ in range(n)]


# ---------------------------------------------------------------------------
# Wigner d
# ---------------------------------------------------------------------------

def test_wigner_d_degree_one_classics():
    for th in (0.3, 1.2, 2.6):
        assert math.isclose(wigner_d(1, 0, 0, th), math.cos(th), abs_tol=1e-14)
        assert math.isclose(wigner_d(1, 1, 1, th), math.cos(th / 2.0) ** 2, abs_tol=1e-14)
        assert math.isclose(wigner_d(1, 1, 0, th), -math.sin(th) / math.sqrt(2.0), abs_tol=1e-14)
        assert math.isclose(wigner_d(1, -1, 0, th), math.sin(th) / math.sqrt(2.0), abs_tol=1e-14)


def test_wigner_d_identity_at_zero():
    for l in (1, 4, 9):
        np.testing.assert_allclose(wigner_d_matrix(l, 0.0), np.eye(2 * l + 1), atol=1e-12)


@pytest.mark.parametrize("l", [2, 7, 15])
def test_wigner_d_matrix_orthogonal(l):
    d = wigner_d_matrix(l, 1.234)
    assert np.abs(d.T @ d - np.eye(2 * l + 1)).max() < 1e-10


def test_wigner_d_representation_property():
    t1, t2 = 0.37, 1.18
    for l in (3, 8):
        d1 = wigner_d_matrix(l, t1)
        d2 = wigner_d_matrix(l, t2)
        np.testing.assert_allclose(d1 @ d2, wigner_d_matrix(l, t1 + t2), atol=1e-11)


def test_wigner_d_column_normalized():
    thetas = np.array([0.2, 1.0, 2.8])
    for l, n in [(5, 0), (15, 2), (30, -4)]:
        col = wigner_d_column(l, n, thetas)
        np.testing.assert_allclose((col * col).sum(axis=0), 1.0, atol=1e-10)


def test_wigner_d_column_deriv_degree_one():
    th = np.linspace(0.1, 3.0, 7)
    der = wigner_d_column_deriv(1, 0, th)
    np.testing.assert_allclose(der[1], -np.sin(th), atol=1e-13)  # m = 0 row


def test_wigner_d_column_deriv_finite_difference():
    th = np.array([0.4, 1.3, 2.2])
    h = 1e-6
    for l, n in [(8, 1), (15, 2)]:
        fd = (wigner_d_column(l, n, th + h) - wigner_d_column(l, n, th - h)) / (2 * h)
        np.testing.assert_allclose(wigner_d_column_deriv(l, n, th), fd, atol=1e-6)


def test_wigner_d_bounds():
    with pytest.raises(ValueError):
        wigner_d(MAX_DEGREE + 1, 0, 0, 1.0)
    with pytest.raises(ValueError):
        wigner_d(3, 4, 0, 1.0)
    with pytest.raises(ValueError):
        wigner_d_column(3, -4, [1.0])


# ---------------------------------------------------------------------------
# profiles, sampling
# ---------------------------------------------------------------------------

def test_single_band_profile_frequencies():
    assert math.isclose(PROFILE.xi2, 118.0, rel_tol=1e-12)
    assert math.isclose(PROFILE.r2, 4.0 / 118.0, rel_tol=1e-12)
    assert PROFILE.max_degree == 15


def test_profile_validation():
    with pytest.raises(ValueError):
        SpectralProfile(spin=2, bands=((1, math.sqrt(2.0)),))  # l < |s|
    with pytest.raises(ValueError):
        SpectralProfile(spin=0, bands=((3, 1.0),))  # not normalized
    with pytest.raises(ValueError):
        SpectralProfile(spin=0, bands=((3, 1.0), (3, 1.0)))  # duplicate degree
    with pytest.raises(ValueError):
        SpectralProfile(spin=0, bands=((MAX_DEGREE + 1, math.sqrt(2.0)),))
    with pytest.raises(ValueError):
        SpectralProfile(spin=1, bands=((2, -math.sqrt(2.0)),))
    with pytest.raises(ValueError):
        SpectralProfile(spin=0, bands=())


def test_profile_normalized_and_dict_roundtrip():
    prof = SpectralProfile.normalized(1, [(2, 1.0), (5, 3.0)])
    assert math.isclose(sum(c * c for _, c in prof.bands), 2.0, rel_tol=1e-12)
    again = SpectralProfile.from_dict(prof.to_dict())
    assert again == prof
    raw = {"spin": 1, "bands": [[2, 1.0], [5, 3.0]], "normalize": True}
    assert SpectralProfile.from_dict(raw) == prof


def test_sample_deterministic_and_stream_keyed():
    r1 = sample(PROFILE, 987, index=3)
    r2 = sample(PROFILE, 987, index=3)
    for g1, g2 in zip(r1.coefficients, r2.coefficients):
        np.testing.assert_array_equal(g1, g2)
    r3 = sample(PROFILE, 987, index=4)
    assert not np.array_equal(r1.coefficients[0], r3.coefficients[0])
    r4 = sample(PROFILE, 988, index=3)
    assert not np.array_equal(r1.coefficients[0], r4.coefficients[0])


def test_band_coefficients_lookup():
    r = sample(PROFILE, 1)
    assert r.band_coefficients(15).shape == (31,)
    with pytest.raises(KeyError):
        r.band_coefficients(14)


# ---------------------------------------------------------------------------
# evaluation and the spin contract
# ---------------------------------------------------------------------------

def test_spin_phase_contract():
    rng = np.random.default_rng(21)
    r = sample(PROFILE, 555)
    for p in random_points(rng, 6):
        X = evaluate(r, p)
        P = euler_to_matrix(p)
        for dpsi in (0.41, 1.7, -2.2):
            q = matrix_to_euler(P @ rotation_about_z(dpsi))
            got = evaluate(r, q)
            want = X * np.exp(-1j * PROFILE.spin * dpsi)
            assert abs(got - want) < 1e-8


def test_quarter_and_half_fiber_identities():
    # f(P R_z(pi/2s)) = Im X(P) and f(P R_z(pi/s)) = -f(P)
    rng = np.random.default_rng(22)
    r = sample(PROFILE, 556)
    s = PROFILE.spin
    for p in random_points(rng, 6):
        X = evaluate(r, p)
        P = euler_to_matrix(p)
        quarter = evaluate(r, matrix_to_euler(P @ rotation_about_z(math.pi / (2 * s))))
        half = evaluate(r, matrix_to_euler(P @ rotation_about_z(math.pi / s)))
        assert abs(quarter.real - X.imag) < 1e-10
        assert abs(half.real + X.real) < 1e-10
        assert abs(abs(X) ** 2 - (X.real ** 2 + quarter.real ** 2)) < 1e-9


def test_jet_matches_finite_differences():
    rng = np.random.default_rng(23)
    r = sample(PROFILE, 557)
    h = 1e-6
    for p in random_points(rng, 5):
        j = jet(r, p)
        assert abs(j.value - evaluate(r, p).real) < 1e-13

        def f(dphi=0.0, dth=0.0, dpsi=0.0):
            return evaluate(r, (p.phi + dphi, p.theta + dth, p.psi + dpsi)).real

        assert abs(j.d_phi - (f(dphi=h) - f(dphi=-h)) / (2 * h)) < 1e-6
        assert abs(j.d_theta - (f(dth=h) - f(dth=-h)) / (2 * h)) < 1e-6
        assert abs(j.d_psi - (f(dpsi=h) - f(dpsi=-h)) / (2 * h)) < 1e-6
        # psi-derivative is s times the imaginary part
        assert abs(j.d_psi - PROFILE.spin * j.complex_value.imag) < 1e-12


def test_jet_many_consistent_with_scalar():
    rng = np.random.default_rng(24)
    r = sample(PROFILE, 558)
    pts = random_points(rng, 8)
    phis = [p.phi for p in pts]
    thetas = [p.theta for p in pts]
    psis = [p.psi for p in pts]
    jm = jet_many(r, phis, thetas, psis)
    for k, p in enumerate(pts):
        js = jet(r, p)
        assert abs(jm.complex_value[k] - js.complex_value) < 1e-12
        assert abs(jm.d_phi[k] - js.d_phi) < 1e-12
        assert abs(jm.d_theta[k] - js.d_theta) < 1e-12
        assert abs(jm.d_psi[k] - js.d_psi) < 1e-12


def test_evaluate_grid_matches_pointwise():
    r = sample(PROFILE, 559)
    phis = np.linspace(-math.pi, math.pi, 7, endpoint=False)
    thetas = np.array([0.3, 1.2, 2.1])
    psis = np.linspace(-math.pi, math.pi, 5, endpoint=False)
    grid = evaluate_grid(r, phis, thetas, psis)
    assert grid.shape == (7, 3, 5)
    rng = np.random.default_rng(25)
    for _ in range(12):
        i, j, k = rng.integers(0, [7, 3, 5])
        want = evaluate(r, (phis[i], thetas[j], psis[k]))
        assert abs(grid[i, j, k] - want) < 1e-10


def test_spin_norm_fiber_invariant():
    r = sample(PROFILE, 560)
    x = np.array([0.6, -0.3, math.sqrt(1.0 - 0.36 - 0.09)])
    base = fiber_base_point(x)
    sn = spin_norm(r, x)
    assert math.isclose(sn, abs(evaluate(r, base)), rel_tol=1e-12)
    # |X| is constant along the fiber
    shifted = EulerPoint(base.phi, base.theta, 1.234)
    assert abs(abs(evaluate(r, shifted)) - sn) < 1e-10


def test_horizontal_norm_averages_fiber_gradient():
    # the squared gradient of Re X oscillates along the fiber; the reported
    # norm must be constant along the fiber and match the fiber average of
    # the pointwise squared gradient (trapezoid rule is exact here, the
    # integrand is a trigonometric polynomial of degree 2s)
    r = sample(PROFILE, 560)
    x = np.array([0.6, -0.3, math.sqrt(1.0 - 0.36 - 0.09)])
    base = fiber_base_point(x)
    hn = horizontal_norm(r, x)

    psis = np.linspace(-math.pi, math.pi, 32, endpoint=False)
    sq = []
    for ps in psis:
        j = jet(r, EulerPoint(base.phi, base.theta, float(ps)))
        h1, h2 = horizontal_components(j.gradient, base.theta)
        sq.append(h1 * h1 + h2 * h2)
    assert math.isclose(hn * hn, float(np.mean(sq)), rel_tol=1e-10)

    # the oscillation is a pure cosine with the predicted mean and amplitude;
    # on an equispaced full-period grid the sample variance of a pure cosine
    # is exactly amp^2 / 2
    mean, amp = horizontal_gradient_invariants(r, x)
    assert math.isclose(mean, float(np.mean(sq)), rel_tol=1e-10)
    assert math.isclose(math.sqrt(2.0 * float(np.var(sq))), amp, rel_tol=1e-9)

    # invariants themselves do not depend on which fiber point the complex
    # jet is taken at
    for ps in (0.7, 2.1):
        js = jet(r, EulerPoint(base.phi, base.theta, ps))
        z1, z2 = horizontal_components(js.complex_gradient, base.theta)
        assert math.isclose(0.5 * (abs(z1) ** 2 + abs(z2) ** 2), mean, rel_tol=1e-10)
        assert math.isclose(0.5 * abs(z1 * z1 + z2 * z2), amp, rel_tol=1e-9)


# ---------------------------------------------------------------------------
# group action and covariance
# ---------------------------------------------------------------------------

def test_rotate_matches_left_translation():
    rng = np.random.default_rng(26)
    r = sample(PROFILE, 561)
    rot = EulerPoint(1.0, 0.6, -2.0)
    R = euler_to_matrix(rot)
    rr = rotate(r, rot)
    for p in random_points(rng, 6):
        target = matrix_to_euler(R @ euler_to_matrix(p))
        assert abs(evaluate(rr, p) - evaluate(r, target)) < 1e-8


def test_rotate_handles_axis_rotations():
    r = sample(PROFILE, 562)
    alpha = 0.77
    rr = rotate(r, rotation_about_z(alpha))
    p = EulerPoint(0.2, 1.3, 0.5)
    target = matrix_to_euler(rotation_about_z(alpha) @ euler_to_matrix(p))
    assert abs(evaluate(rr, p) - evaluate(r, target)) < 1e-9


def test_rotate_preserves_coefficient_energy():
    r = sample(PROFILE, 563)
    rr = rotate(r, EulerPoint(-2.0, 2.2, 0.4))
    for g1, g2 in zip(r.coefficients, rr.coefficients):
        assert math.isclose(np.sum(np.abs(g1) ** 2), np.sum(np.abs(g2) ** 2), rel_tol=1e-10)


def test_rotate_rejects_non_rotation():
    r = sample(PROFILE, 564)
    with pytest.raises(ValueError):
        rotate(r, np.eye(3) * 2.0)


def test_covariance_basic_properties():
    rng = np.random.default_rng(27)
    pts = random_points(rng, 4)
    assert math.isclose(covariance(PROFILE, pts[0], pts[0]), 1.0, rel_tol=1e-12)
    c_pq = covariance(PROFILE, pts[0], pts[1])
    c_qp = covariance(PROFILE, pts[1], pts[0])
    assert math.isclose(c_pq, c_qp, rel_tol=1e-10, abs_tol=1e-12)
    # left invariance: only the relative rotation matters
    R = euler_to_matrix(pts[2])
    moved = covariance(PROFILE, R @ euler_to_matrix(pts[0]), R @ euler_to_matrix(pts[1]))
    assert math.isclose(c_pq, moved, rel_tol=1e-9, abs_tol=1e-12)


def test_covariance_against_direct_construction():
    # independent Monte Carlo: rebuild the field from raw Gaussian draws
    # without going through sample()/evaluate()
    l, s, c = 15, 2, math.sqrt(2.0)
    p = EulerPoint(0.3, 1.1, -0.7)
    q = EulerPoint(-0.9, 0.5, 1.3)
    rng = np.random.default_rng(7)
    n = 100_000
    g = (rng.standard_normal((n, 2 * l + 1)) + 1j * rng.standard_normal((n, 2 * l + 1))) / math.sqrt(2.0)

    def field_values(pt):
        col = wigner_d_column(l, s, [pt.theta])[:, 0]
        m = np.arange(-l, l + 1)
        w = c * np.exp(-1j * m * pt.phi) * col * np.exp(-1j * s * pt.psi)
        return (g @ w).real

    fp, fq = field_values(p), field_values(q)
    want = covariance(PROFILE, p, q)
    got = float((fp * fq).mean())
    stderr = float((fp * fq).std(ddof=1)) / math.sqrt(n)
    assert abs(got - want) < 5.0 * stderr
    assert abs(fp.var(ddof=1) - 1.0) < 5.0 * math.sqrt(2.0 / n)


def test_realization_is_frozen():
    r = sample(PROFILE, 565)
    assert isinstance(r, FieldRealization)
    with pytest.raises(Exception):
        r.seed = 1

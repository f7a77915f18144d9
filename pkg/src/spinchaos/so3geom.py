"""Euler-angle chart, embeddings and metric helpers for the rotation group.

Convention: a rotation is factored as R_z(phi) R_y(theta) R_z(psi) with
phi, psi in [-pi, pi) and theta in (0, pi).  The chart covers the group up
to the measure-zero set where theta hits a pole.  The projection to the unit
sphere is P e_3 = (sin t cos p, sin t sin p, cos t), and the circle fibers of
that projection are exactly the psi-orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# how close theta may get to 0 or pi before the chart is rejected
POLE_TOL = 1e-9
# orthogonality tolerance for matrix_to_euler input validation
ORTHO_TOL = 1e-9


def _wrap_angle(a):
    """Reduce an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class EulerPoint:
    """A chart point (phi, theta, psi); theta is kept away from the poles."""

    phi: float
    theta: float
    psi: float

    def __post_init__(self):
        if not (-math.pi <= self.phi <= math.pi):
            raise ValueError(f"phi out of range [-pi, pi]: {self.phi}")
        if not (-math.pi <= self.psi <= math.pi):
            raise ValueError(f"psi out of range [-pi, pi]: {self.psi}")
        if not (POLE_TOL < self.theta < math.pi - POLE_TOL):
            raise ValueError(
                f"theta = {self.theta} is outside ({POLE_TOL}, pi - {POLE_TOL}); "
                "the chart degenerates at the poles")

    @classmethod
    def wrapped(cls, phi, theta, psi):
        """Build a point with phi and psi reduced mod 2 pi into [-pi, pi)."""
        return cls(_wrap_angle(phi), theta, _wrap_angle(psi))

    def as_tuple(self):
        return (self.phi, self.theta, self.psi)


def rotation_about_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def euler_to_matrix(point):
    """Rotation matrix R_z(phi) R_y(theta) R_z(psi) for a chart point."""
    phi, theta, psi = point.as_tuple() if isinstance(point, EulerPoint) else point
    return rotation_about_z(phi) @ rotation_about_y(theta) @ rotation_about_z(psi)


def euler_to_matrices(phi, theta, psi):
    """Vectorized euler_to_matrix: broadcast inputs -> (..., 3, 3) array."""
    phi, theta, psi = np.broadcast_arrays(
        np.asarray(phi, float), np.asarray(theta, float), np.asarray(psi, float))
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cs, ss = np.cos(psi), np.sin(psi)
    out = np.empty(phi.shape + (3, 3))
    out[..., 0, 0] = cp * ct * cs - sp * ss
    out[..., 0, 1] = -cp * ct * ss - sp * cs
    out[..., 0, 2] = cp * st
    out[..., 1, 0] = sp * ct * cs + cp * ss
    out[..., 1, 1] = -sp * ct * ss + cp * cs
    out[..., 1, 2] = sp * st
    out[..., 2, 0] = -st * cs
    out[..., 2, 1] = st * ss
    out[..., 2, 2] = ct
    return out


def matrix_to_euler(P):
    """Invert euler_to_matrix.  Validates orthogonality and rejects poles."""
    P = np.asarray(P, dtype=float)
    if P.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {P.shape}")
    if not np.allclose(P.T @ P, np.eye(3), atol=ORTHO_TOL):
        raise ValueError("matrix is not orthogonal within tolerance")
    if np.linalg.det(P) < 0.0:
        raise ValueError("matrix has determinant -1, not a rotation")
    ct = float(np.clip(P[2, 2], -1.0, 1.0))
    theta = math.acos(ct)
    if not (POLE_TOL < theta < math.pi - POLE_TOL):
        raise ValueError(f"matrix lies at a chart pole (theta = {theta})")
    phi = math.atan2(P[1, 2], P[0, 2])
    psi = math.atan2(P[2, 1], -P[2, 0])
    return EulerPoint(_wrap_angle(phi), theta, _wrap_angle(psi))


def project(point):
    """Unit sphere point P e_3 below a chart point."""
    phi, theta, _ = point.as_tuple() if isinstance(point, EulerPoint) else point
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def embed(point_or_matrix):
    """Map into R^6 as the concatenated second and third matrix columns.

    The image always has squared norm 2 (two orthonormal columns), and a
    psi-fiber traces a planar unit circle in the first three coordinates
    while the last three stay fixed.  Useful for export and interop; length
    and area computations use matrix_embedding instead, which is the
    isometric one for the metric all densities here are written in.
    """
    P = _as_matrix(point_or_matrix)
    return np.concatenate([P[:, 1], P[:, 2]])


def matrix_embedding(point_or_matrix):
    """Map into R^9 as P / sqrt(2), flattened.

    The Euclidean geometry of this image reproduces, to second order in the
    step, the metric whose chart Gram matrix is gram(theta, 1, 1): for
    nearby rotations |P/sqrt(2) - Q/sqrt(2)|^2 matches delta^T G delta with
    delta the chart difference.  Triangle areas of extracted level surfaces
    are computed on this image.
    """
    P = _as_matrix(point_or_matrix)
    return (P / math.sqrt(2.0)).reshape(-1)


def _as_matrix(point_or_matrix):
    if isinstance(point_or_matrix, EulerPoint):
        return euler_to_matrix(point_or_matrix)
    P = np.asarray(point_or_matrix, dtype=float)
    if P.shape == (3,):
        raise ValueError("got an angle triple; pass an EulerPoint or a 3x3 matrix")
    if P.shape != (3, 3):
        raise ValueError(f"expected EulerPoint or 3x3 matrix, got shape {P.shape}")
    return P


def fiber_base_point(x):
    """Chart point with psi = 0 over a unit sphere point x."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x)
    if abs(r - 1.0) > 1e-8:
        raise ValueError(f"fiber base needs a unit vector, |x| = {r}")
    theta = math.acos(float(np.clip(x[2], -1.0, 1.0)))
    if not (POLE_TOL < theta < math.pi - POLE_TOL):
        raise ValueError(f"sphere point too close to a pole (theta = {theta})")
    phi = math.atan2(x[1], x[0])
    return EulerPoint(_wrap_angle(phi), theta, 0.0)


def fiber_points(x, k):
    """k equally spaced chart points on the circle fiber over x, starting at psi = 0."""
    if k < 1:
        raise ValueError(f"need at least one fiber point, got k = {k}")
    base = fiber_base_point(x)
    return [EulerPoint(base.phi, base.theta, _wrap_angle(2.0 * math.pi * j / k))
            for j in range(k)]


# ---------------------------------------------------------------------------
# Metric: chart Gram matrix of the field-adapted metric and gradient splitting
# ---------------------------------------------------------------------------

def gram(theta, xi, spin):
    """Chart Gram matrix, in (phi, theta, psi) order, of the metric scaled by
    the horizontal frequency xi and the fiber frequency |spin|.

    At xi = spin = 1 this is the bi-invariant reference metric
    [[1, 0, cos t], [0, 1, 0], [cos t, 0, 1]].
    """
    xi2, s2 = xi * xi, spin * spin
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([
        [xi2 * st * st + s2 * ct * ct, 0.0, s2 * ct],
        [0.0, xi2, 0.0],
        [s2 * ct, 0.0, s2],
    ])


def gram_det(theta, xi, spin):
    """Determinant of gram(theta, xi, spin): xi^4 spin^2 sin^2 theta."""
    return xi ** 4 * spin ** 2 * math.sin(theta) ** 2


def gram_inverse_reference(theta):
    """Closed-form inverse of the reference Gram matrix gram(theta, 1, 1)."""
    ct, st = math.cos(theta), math.sin(theta)
    if abs(st) < POLE_TOL:
        raise ValueError(f"reference metric is singular at theta = {theta}")
    inv_s2 = 1.0 / (st * st)
    return np.array([
        [inv_s2, 0.0, -ct * inv_s2],
        [0.0, 1.0, 0.0],
        [-ct * inv_s2, 0.0, inv_s2],
    ])


def horizontal_components(grad, theta):
    """Components of the chart gradient along an orthonormal horizontal frame.

    grad holds the chart partials (d_phi, d_theta, d_psi).  The frame is
    (d_phi - cos t d_psi)/sin t and d_theta, both unit and orthogonal to the
    fiber direction in the reference metric; returns the pair of components
    in that order.  Accepts scalars or matching arrays.
    """
    gphi, gtheta, gpsi = grad
    ct, st = np.cos(theta), np.sin(theta)
    if np.any(np.abs(st) < POLE_TOL):
        raise ValueError(f"horizontal frame undefined at theta = {theta}")
    return (gphi - ct * gpsi) / st, gtheta


class GradientSplit(NamedTuple):
    vertical: float
    horizontal_norm: float
    weighted_norm: float


def decompose_gradient(grad, theta, xi, spin):
    """Split a chart gradient into fiber and horizontal data.

    Returns (vertical, horizontal_norm, weighted_norm) where vertical is the
    psi-partial, horizontal_norm is the reference-metric length of the
    gradient component orthogonal to the fiber, and weighted_norm**2 =
    xi^2 * horizontal_norm^2 + spin^2 * vertical^2 is the squared length in
    the frequency-scaled metric, the quantity the area formulas integrate.
    """
    h1, h2 = horizontal_components(grad, theta)
    hnorm = math.hypot(h1, h2)
    v = float(grad[2])
    weighted = math.sqrt(xi * xi * hnorm * hnorm + spin * spin * v * v)
    return GradientSplit(v, hnorm, weighted)

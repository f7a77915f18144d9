"""Band-limited spin-weighted Gaussian fields on the rotation group.

A realization is a finite sum over degrees l of matrix-element waves

    X(phi, theta, psi) = sum_l c_l sum_m gamma^l_m e^(-i m phi) d^l_(m,s)(theta) e^(-i s psi)

with iid standard complex Gaussian coefficients gamma (E|gamma|^2 = 1) and
real amplitudes c_l normalized so the real part f = Re X has unit variance.
The integer s is the spin: moving along a fiber multiplies X by a phase,
which is what makes |X| and the horizontal gradient data fiber functions.

Wigner d evaluation uses the explicit factorial sum with log-space
coefficients; degrees are capped (MAX_DEGREE) well inside its stable range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .so3geom import EulerPoint, euler_to_matrix, fiber_base_point, horizontal_components

MAX_DEGREE = 64
PROFILE_NORM_TOL = 1e-10


# ---------------------------------------------------------------------------
# Wigner d matrices
# ---------------------------------------------------------------------------

@lru_cache(maxsize=512)
def _wigner_row_terms(l, n):
    """Per-m term tables for d^l_(m, n): (coefficients, cos powers, sin powers).

    d^l_(m,n)(t) = sum_k coef_k cos(t/2)^p_k sin(t/2)^q_k with the classical
    factorial coefficients, assembled in log space.
    """
    lf = math.lgamma
    rows = []
    for m in range(-l, l + 1):
        k_lo = max(0, n - m)
        k_hi = min(l + n, l - m)
        ks = np.arange(k_lo, k_hi + 1)
        log_pref = 0.5 * (lf(l + m + 1) + lf(l - m + 1) + lf(l + n + 1) + lf(l - n + 1))
        log_den = np.array([
            lf(l + n - k + 1) + lf(k + 1) + lf(m - n + k + 1) + lf(l - m - k + 1)
            for k in ks])
        coefs = (-1.0) ** (m - n + ks) * np.exp(log_pref - log_den)
        rows.append((coefs, 2 * l + n - m - 2 * ks, m - n + 2 * ks))
    return rows


def _check_degree(l, *indices):
    if not 0 <= l <= MAX_DEGREE:
        raise ValueError(f"degree l must be in [0, {MAX_DEGREE}], got {l}")
    for idx in indices:
        if abs(idx) > l:
            raise ValueError(f"index {idx} out of range for degree {l}")


def wigner_d_column(l, n, theta):
    """All values d^l_(m, n)(theta) for m = -l..l; shape (2l+1, len(theta))."""
    _check_degree(l, n)
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    c = np.cos(0.5 * arr)
    s = np.sin(0.5 * arr)
    out = np.empty((2 * l + 1, arr.size))
    for i, (coefs, cpow, spow) in enumerate(_wigner_row_terms(l, n)):
        out[i] = (coefs * c[:, None] ** cpow * s[:, None] ** spow).sum(axis=1)
    return out


def wigner_d(l, m, n, theta):
    """Single Wigner d value d^l_(m, n)(theta)."""
    _check_degree(l, m, n)
    return float(wigner_d_column(l, n, [theta])[m + l, 0])


def wigner_d_matrix(l, theta):
    """Full (2l+1) x (2l+1) Wigner d matrix, rows indexed by m, columns by n."""
    _check_degree(l)
    out = np.empty((2 * l + 1, 2 * l + 1))
    for n in range(-l, l + 1):
        out[:, n + l] = wigner_d_column(l, n, [theta])[:, 0]
    return out


def wigner_d_column_deriv(l, n, theta):
    """Theta-derivative of wigner_d_column via the index-raising recursion

        d/dt d_(m,n) = (1/2) [sqrt((l-m)(l+m+1)) d_(m+1,n)
                              - sqrt((l+m)(l-m+1)) d_(m-1,n)].
    """
    col = wigner_d_column(l, n, theta)
    m = np.arange(-l, l + 1, dtype=float)
    a_up = np.sqrt((l - m) * (l + m + 1.0))
    a_dn = np.sqrt((l + m) * (l - m + 1.0))
    zeros = np.zeros((1, col.shape[1]))
    up = np.vstack([col[1:], zeros])
    dn = np.vstack([zeros, col[:-1]])
    return 0.5 * (a_up[:, None] * up - a_dn[:, None] * dn)


# ---------------------------------------------------------------------------
# Spectral profiles and realizations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralProfile:
    """Spin and band content (degree, amplitude) of a unit-variance field.

    Amplitudes must satisfy sum c_l^2 / 2 = 1 so that Var(Re X) = 1; use
    `normalized` to rescale arbitrary weights.  The derived horizontal
    frequency squared is xi2 = sum (c_l^2/2) (l(l+1) - s^2) / 2 and must be
    positive.
    """

    spin: int
    bands: tuple

    def __post_init__(self):
        if not isinstance(self.spin, int):
            raise ValueError(f"spin must be an integer, got {self.spin!r}")
        if not self.bands:
            raise ValueError("profile needs at least one band")
        bands = tuple((int(l), float(c)) for l, c in self.bands)
        object.__setattr__(self, "bands", bands)
        degrees = [l for l, _ in bands]
        if len(set(degrees)) != len(degrees):
            raise ValueError(f"duplicate degrees in profile: {degrees}")
        for l, c in bands:
            if l < max(abs(self.spin), 1):
                raise ValueError(
                    f"degree {l} below minimum {max(abs(self.spin), 1)} for spin {self.spin}")
            if l > MAX_DEGREE:
                raise ValueError(f"degree {l} exceeds cap {MAX_DEGREE}")
            if c <= 0.0:
                raise ValueError(f"amplitude for degree {l} must be positive, got {c}")
        total = sum(c * c for _, c in bands) / 2.0
        if abs(total - 1.0) > PROFILE_NORM_TOL:
            raise ValueError(
                f"amplitudes not normalized: sum c^2/2 = {total} (want 1); "
                "use SpectralProfile.normalized to rescale")
        if self.xi2 <= 0.0:
            raise ValueError(f"horizontal frequency xi2 = {self.xi2} must be positive")

    @property
    def xi2(self):
        s2 = self.spin * self.spin
        return sum((c * c / 2.0) * (l * (l + 1) - s2) / 2.0 for l, c in self.bands)

    @property
    def xi(self):
        return math.sqrt(self.xi2)

    @property
    def r2(self):
        """Frequency ratio spin^2 / xi2, the argument the chaos coefficients take."""
        return self.spin * self.spin / self.xi2

    @property
    def max_degree(self):
        return max(l for l, _ in self.bands)

    @classmethod
    def single_band(cls, spin, degree):
        return cls(spin=spin, bands=((degree, math.sqrt(2.0)),))

    @classmethod
    def normalized(cls, spin, weights):
        """Build from (degree, weight) pairs, rescaling weights to unit variance."""
        weights = [(int(l), float(w)) for l, w in weights]
        total = sum(w * w for _, w in weights) / 2.0
        if total <= 0.0:
            raise ValueError("weights must not all vanish")
        scale = 1.0 / math.sqrt(total)
        return cls(spin=spin, bands=tuple((l, w * scale) for l, w in weights))

    def to_dict(self):
        return {"spin": self.spin,
                "bands": [{"degree": l, "amplitude": c} for l, c in self.bands]}

    @classmethod
    def from_dict(cls, data):
        spin = int(data["spin"])
        raw = data["bands"]
        pairs = []
        for entry in raw:
            if isinstance(entry, dict):
                pairs.append((entry["degree"], entry["amplitude"]))
            else:
                pairs.append(tuple(entry))
        if data.get("normalize", False):
            return cls.normalized(spin, pairs)
        return cls(spin=spin, bands=tuple((int(l), float(c)) for l, c in pairs))


@dataclass(frozen=True)
class FieldRealization:
    """A sampled field: profile plus one complex coefficient vector per band."""

    profile: SpectralProfile
    coefficients: tuple
    seed: object = None
    index: int = 0

    def band_coefficients(self, degree):
        for (l, _), gam in zip(self.profile.bands, self.coefficients):
            if l == degree:
                return gam
        raise KeyError(f"profile has no band of degree {degree}")


def sample(profile, seed, index=0):
    """Draw one realization.

    Streams are keyed by (seed, index) through a counter-based Philox
    generator, so realization `index` is the same no matter how many other
    indices are drawn, in what order, or on how many workers.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    rng = np.random.Generator(np.random.Philox(ss))
    coeffs = []
    for l, _ in profile.bands:
        z = rng.standard_normal(2 * l + 1) + 1j * rng.standard_normal(2 * l + 1)
        coeffs.append(z / math.sqrt(2.0))
    return FieldRealization(profile=profile, coefficients=tuple(coeffs),
                            seed=seed, index=index)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _coefficient_theta_sum(realization, thetas, deriv=False):
    """sum_l c_l gamma^l_m d^l_(m,s)(theta) stacked over m = -lmax..lmax."""
    prof = realization.profile
    lmax = prof.max_degree
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    A = np.zeros((2 * lmax + 1, thetas.size), dtype=complex)
    column = wigner_d_column_deriv if deriv else wigner_d_column
    for (l, c), gam in zip(prof.bands, realization.coefficients):
        col = column(l, prof.spin, thetas)
        A[lmax - l:lmax + l + 1] += c * gam[:, None] * col
    return A


def evaluate_many(realization, phi, theta, psi):
    """Complex field values X at arrays of chart coordinates (broadcast 1:1)."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    prof = realization.profile
    lmax = prof.max_degree
    A = _coefficient_theta_sum(realization, theta)
    m = np.arange(-lmax, lmax + 1)
    phase = np.exp(-1j * m[:, None] * phi[None, :])
    return (A * phase).sum(axis=0) * np.exp(-1j * prof.spin * psi)


def evaluate(realization, point):
    """Complex field value X at a single chart point."""
    phi, theta, psi = point.as_tuple() if isinstance(point, EulerPoint) else point
    return complex(evaluate_many(realization, [phi], [theta], [psi])[0])


def evaluate_grid(realization, phis, thetas, psis):
    """X on a product grid of chart coordinates; shape (nphi, ntheta, npsi).

    Separates the sum: the theta-dependent part is evaluated once per theta
    node and the phi/psi dependence enters through pure phase factors.
    """
    prof = realization.profile
    lmax = prof.max_degree
    A = _coefficient_theta_sum(realization, thetas)
    m = np.arange(-lmax, lmax + 1)
    phase = np.exp(-1j * np.outer(m, np.asarray(phis, dtype=float)))
    B = phase.T @ A
    fiber = np.exp(-1j * prof.spin * np.asarray(psis, dtype=float))
    return B[:, :, None] * fiber[None, None, :]


@dataclass(frozen=True)
class FieldJet:
    """Field value and first chart derivatives.

    The complex value and complex partials of X are stored; the partials of
    f = Re X are their real parts, exposed as d_phi, d_theta, d_psi.
    """

    complex_value: object
    complex_gradient: tuple

    @property
    def value(self):
        return self.complex_value.real if np.ndim(self.complex_value) else float(self.complex_value.real)

    @property
    def d_phi(self):
        return self.complex_gradient[0].real

    @property
    def d_theta(self):
        return self.complex_gradient[1].real

    @property
    def d_psi(self):
        return self.complex_gradient[2].real

    @property
    def gradient(self):
        return (self.d_phi, self.d_theta, self.d_psi)


def jet_many(realization, phi, theta, psi):
    """First-order jets at arrays of chart coordinates."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    prof = realization.profile
    lmax = prof.max_degree
    m = np.arange(-lmax, lmax + 1)
    phase = np.exp(-1j * m[:, None] * phi[None, :])
    fiber = np.exp(-1j * prof.spin * psi)
    A = _coefficient_theta_sum(realization, theta)
    A_t = _coefficient_theta_sum(realization, theta, deriv=True)
    X = (A * phase).sum(axis=0) * fiber
    X_phi = (A * (-1j * m[:, None]) * phase).sum(axis=0) * fiber
    X_theta = (A_t * phase).sum(axis=0) * fiber
    X_psi = -1j * prof.spin * X
    return FieldJet(complex_value=X, complex_gradient=(X_phi, X_theta, X_psi))


def jet(realization, point):
    """First-order jet at a single chart point (scalar fields)."""
    phi, theta, psi = point.as_tuple() if isinstance(point, EulerPoint) else point
    j = jet_many(realization, [phi], [theta], [psi])
    return FieldJet(complex_value=complex(j.complex_value[0]),
                    complex_gradient=tuple(complex(g[0]) for g in j.complex_gradient))


def spin_norm(realization, x):
    """|X| on the fiber over sphere point x (independent of psi up to phase)."""
    return abs(evaluate(realization, fiber_base_point(x)))


def horizontal_gradient_invariants(realization, x):
    """Rotation invariants (mean, amplitude) of the squared horizontal gradient.

    Along the fiber over x the squared horizontal gradient of f = Re X is a
    pure harmonic oscillation,

        ||grad_H f||^2(psi) = mean + amplitude * cos(2 s psi - const),

    because the gradient of Re X mixes with that of Im X under the fiber
    action.  Both invariants come from the complex horizontal components
    z = (z1, z2): mean = (|z1|^2 + |z2|^2)/2 and amplitude = |z1^2 + z2^2|/2,
    and both are constant along the fiber.
    """
    base = fiber_base_point(x)
    j = jet(realization, base)
    z1, z2 = horizontal_components(j.complex_gradient, base.theta)
    mean = 0.5 * (abs(z1) ** 2 + abs(z2) ** 2)
    amplitude = 0.5 * abs(z1 * z1 + z2 * z2)
    return mean, amplitude


def horizontal_norm(realization, x):
    """Fiber-invariant horizontal gradient norm on the fiber over x.

    The pointwise norm of grad_H Re X is not constant along the fiber (only
    its law is); the invariant quantity is the modulus of the complex
    horizontal gradient.  Returned normalized so that the square averages
    the squared real-part gradient over the fiber, with expectation 2 xi^2:

        horizontal_norm^2 = (|z1|^2 + |z2|^2)/2.
    """
    mean, _ = horizontal_gradient_invariants(realization, x)
    return math.sqrt(mean)


# ---------------------------------------------------------------------------
# Group actions and covariance
# ---------------------------------------------------------------------------

def _euler_angles_any(P):
    """Chart angles of P, degenerating gracefully at the poles.

    At theta ~ 0 or pi the (phi, psi) split is not unique; the full angle is
    folded into phi and psi is set to 0, which is all the Wigner phase
    factors need.
    """
    ct = float(np.clip(P[2, 2], -1.0, 1.0))
    theta = math.acos(ct)
    if math.sin(theta) < 1e-9:
        if ct > 0.0:
            return math.atan2(P[1, 0], P[0, 0]), 0.0, 0.0
        return math.atan2(-P[0, 1], -P[0, 0]), math.pi, 0.0
    return (math.atan2(P[1, 2], P[0, 2]), theta,
            math.atan2(P[2, 1], -P[2, 0]))


def rotate(realization, rotation):
    """Left-translate a realization: the result evaluates at P to X(R P).

    Works on the coefficients (one unitary mixing matrix per band), so the
    rotated field keeps the fast separable evaluation path.
    """
    if isinstance(rotation, EulerPoint):
        R = euler_to_matrix(rotation)
    else:
        R = np.asarray(rotation, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be an EulerPoint or an orthogonal 3x3 matrix")
    phi_r, theta_r, psi_r = _euler_angles_any(R)
    new_coeffs = []
    for (l, _), gam in zip(realization.profile.bands, realization.coefficients):
        m = np.arange(-l, l + 1)
        d = wigner_d_matrix(l, theta_r)
        D = np.exp(-1j * m[:, None] * phi_r) * d * np.exp(-1j * m[None, :] * psi_r)
        new_coeffs.append(gam @ D)
    return replace(realization, coefficients=tuple(new_coeffs))


def covariance(profile, p, q):
    """E[f(P) f(Q)] for chart points p, q, from the band decomposition.

    Depends only on the relative rotation Q^-1 P; equals 1/2 sum_l c_l^2
    Re D^l_(s,s)(Q^-1 P).
    """
    P = euler_to_matrix(p) if isinstance(p, EulerPoint) else np.asarray(p, float)
    Q = euler_to_matrix(q) if isinstance(q, EulerPoint) else np.asarray(q, float)
    phi, theta, psi = _euler_angles_any(Q.T @ P)
    s = profile.spin
    total = 0.0
    for l, c in profile.bands:
        dval = wigner_d(l, s, s, theta)
        total += 0.5 * c * c * dval * math.cos(s * (phi + psi))
    return total

"""Closed-form coefficients of the chaos decomposition of level-set areas.

The area of a level set, decomposed into Wiener chaoses, has components that
factor into universal coefficients (collected here) against integrals of the
fiber modulus and horizontal-gradient data of the field.  This module keeps
every coefficient as an evaluatable function plus a quadrature oracle where
one exists, and bundles them into an immutable lookup table for the
estimators.

Index conventions: a (or alpha) counts the Hermite order in the field value
or fiber modulus, b (or beta) the order in the gradient norm; i runs inside
the mixing sums.  r2 is the squared frequency ratio spin^2 / xi^2 in [0, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from fractions import Fraction

from scipy.integrate import quad

from .specfun import (
    DivergentSeriesError,
    beta,
    gauss_2f1,
    hermite,
    hermite_even_at_zero,
    sigma_eval,
    unit_sphere_area,
)

SPHERE_AREA_2 = unit_sphere_area(2)   # 4 pi
SPHERE_VOLUME_3 = unit_sphere_area(3)  # 2 pi^2

DEFAULT_MAX_ORDER = 12
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
# below this r2 the hypergeometric argument 1 - r2 is close enough to the
# boundary that the defining integral is evaluated adaptively instead
I_COEFF_QUAD_BELOW = 0.25


def theta_const(a, b):
    """The universal sign/weight constant (-1)^(a+b-1) / (2^(a+b) (2b-1) a! b!).

    Note (2b - 1) = -1 at b = 0, so theta_const(0, 0) = 1 and
    theta_const(1, 0) = -1/2.
    """
    if a < 0 or b < 0:
        raise ValueError(f"indices must be >= 0, got ({a}, {b})")
    sign = -1 if (a + b - 1) % 2 else 1
    value = Fraction(sign,
                     2 ** (a + b) * (2 * b - 1) * math.factorial(a) * math.factorial(b))
    return float(value)


def _i_integrand(alpha, i, b, eps):
    c = math.cos(alpha)
    s = math.sin(alpha)
    return c ** (2 * i) * s ** (2 * (b - i) + 1) * (1.0 - eps * c * c) ** (-(2 * b - 1) / 2.0)


def I_coeff(i, b, r2, method="auto"):
    """Mixing coefficient of the gradient chaos: the integral

        integral over (0, pi) of cos^(2i) sin^(2(b-i)+1) (1 - eps cos^2)^(-(2b-1)/2)

    with eps = 1 - r2, equal in closed form to
    B(i+1/2, b-i+1) * 2F1(b-1/2, i+1/2; b+3/2; 1-r2).

    method: "closed" for the Beta * 2F1 form, "quadrature" for adaptive
    integration of the defining integral, "auto" to integrate below
    r2 = 0.25 (where the hypergeometric argument approaches its boundary)
    and use the closed form elsewhere.
    """
    if not 0 <= i <= b:
        raise ValueError(f"need 0 <= i <= b, got i = {i}, b = {b}")
    if not 0.0 <= r2 <= 1.0:
        raise ValueError(f"r2 must be in [0, 1], got {r2}")
    if r2 == 0.0 and i >= 2:
        raise DivergentSeriesError(
            f"I_coeff({i}, {b}, 0) diverges: the defining integral has a "
            "non-integrable endpoint singularity for i >= 2")
    if method == "auto":
        method = "quadrature" if 0.0 < r2 < I_COEFF_QUAD_BELOW else "closed"
    if method == "closed" or r2 == 0.0:
        return beta(i + 0.5, b - i + 1.0) * gauss_2f1(b - 0.5, i + 0.5, b + 1.5, 1.0 - r2)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    eps = 1.0 - r2
    value, err = quad(_i_integrand, 0.0, math.pi, args=(i, b, eps),
                      epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    if not math.isfinite(value) or err > max(QUAD_EPSABS, 1e-8 * abs(value)):
        raise RuntimeError(
            f"I_coeff quadrature did not converge: value {value}, error estimate {err}")
    return value


def nu_coeff(i, beta_idx, alpha):
    """Weight attached to the i-th mixing term of kappa:

        B(i+1/2, beta+1) / 2F1(alpha-i, i; alpha+1/2; 1)
        * C(2(i+beta), 2i) * theta_const(alpha-i, beta+i) / (2 pi^2).
    """
    if not 0 <= i <= alpha:
        raise ValueError(f"need 0 <= i <= alpha, got i = {i}, alpha = {alpha}")
    if beta_idx < 0:
        raise ValueError(f"beta must be >= 0, got {beta_idx}")
    denom = gauss_2f1(alpha - i, i, alpha + 0.5, 1.0)
    return (beta(i + 0.5, beta_idx + 1.0) / denom
            * math.comb(2 * (i + beta_idx), 2 * i)
            * theta_const(alpha - i, beta_idx + i) / SPHERE_VOLUME_3)


def _hermite_ratio(k, t):
    """H_(2k)(t) / H_(2k)(0)."""
    return hermite(2 * k, t) / hermite_even_at_zero(k)


def kappa_terms(alpha, beta_idx, r2, t):
    """Per-i terms of kappa (useful to inspect magnitudes near r2 = 0)."""
    if alpha < 0 or beta_idx < 0:
        raise ValueError(f"indices must be >= 0, got ({alpha}, {beta_idx})")
    if not 0.0 <= r2 <= 1.0:
        raise ValueError(f"r2 must be in [0, 1], got {r2}")
    terms = []
    for i in range(alpha + 1):
        weight = r2 ** i
        if weight == 0.0 and i > 0:
            # lazy: never evaluate a (possibly divergent) 2F1 under zero weight
            terms.append(0.0)
            continue
        b = beta_idx + i
        f = gauss_2f1(b - 0.5, i + 0.5, b + 1.5, 1.0 - r2)
        terms.append(f * weight * nu_coeff(i, beta_idx, alpha) * _hermite_ratio(alpha - i, t))
    return terms


def kappa(alpha, beta_idx, r2, t):
    """Chaos coefficient at mixed index (alpha, beta), frequency ratio r2, level t.

    For r2 = 0 only the i = 0 term survives (each i >= 1 term carries a
    factor r2^i) and the hypergeometric factor is taken at its convergent
    z = 1 boundary value.
    """
    return math.fsum(kappa_terms(alpha, beta_idx, r2, t))


def kappa_via_I(alpha, beta_idx, r2, t):
    """kappa reassembled from the gradient-route pieces.

    Uses I_coeff (closed form), the binomial, theta_const and the 2F1
    boundary value directly, i.e. the grouping the proofs use before the
    nu-weights are introduced.  Must match kappa to near machine precision.
    """
    if not 0.0 < r2 <= 1.0:
        raise ValueError(f"this route requires r2 in (0, 1], got {r2}")
    total = 0.0
    for i in range(alpha + 1):
        a = alpha - i
        b = beta_idx + i
        total += (I_coeff(i, b, r2, method="closed") * r2 ** i
                  * math.comb(2 * b, 2 * i)
                  * theta_const(a, b) / SPHERE_VOLUME_3
                  / gauss_2f1(a, i, alpha + 0.5, 1.0)
                  * _hermite_ratio(a, t))
    return total


def c_am(a, m):
    """Fiber-average normalizer Gamma(a+1/2) Gamma(m+1/2) / (Gamma(a+m+1/2) sqrt(pi)).

    Equals 1 / 2F1(a, m; a+m+1/2; 1).
    """
    if a < 0 or m < 0:
        raise ValueError(f"indices must be >= 0, got ({a}, {m})")
    return math.exp(math.lgamma(a + 0.5) + math.lgamma(m + 0.5)
                    - math.lgamma(a + m + 0.5) - 0.5 * math.log(math.pi))


def s0_normalization_check(a, b):
    """Ratio kappa(a, b, 0, t) / (H_(2a)(t)/H_(2a)(0) * theta_const(a,b) / (4 pi)).

    Identically 1: the zero-spin specialization of the area expansion must
    reproduce the two-dimensional one on the base sphere.  Evaluated at an
    arbitrary interior level to exercise the cancellation.
    """
    t = 0.5
    denom = _hermite_ratio(a, t) * theta_const(a, b) / SPHERE_AREA_2
    return kappa(a, b, 0.0, t) / denom


def expected_area_density(t, s, xi):
    """Expected level-set area per unit base-sphere area, divided by xi.

    2 e^(-t^2/2) * [arcsin(sqrt(1-r^2))/sqrt(1-r^2) + r] for r = |s|/xi < 1,
    with the obvious analytic continuation 2 e^(-t^2/2) * 2 at r = 1 and the
    arcsinh form for r > 1.
    """
    if xi <= 0.0:
        raise ValueError(f"xi must be positive, got {xi}")
    r = abs(s) / xi
    pref = 2.0 * math.exp(-0.5 * t * t)
    if r == 1.0:
        return pref * 2.0
    if r < 1.0:
        u = math.sqrt(1.0 - r * r)
        return pref * (math.asin(u) / u + r)
    u = math.sqrt(r * r - 1.0)
    return pref * (math.asinh(u) / u + r)


def htilde_grad(b, gamma_v, hnorm2_over_xi2, r2, xi, method="closed"):
    """Closed form of the sphere-averaged gradient chaos kernel:

        xi * sum over i+j=b of C(2b, 2i) I_coeff(i, b, r2) r2^i
                               * H_(2i)(gamma_v) * sigma_eval(2, j, hnorm2/xi2)

    where gamma_v is the normalized fiber derivative and hnorm2_over_xi2 the
    normalized squared horizontal gradient.
    """
    if b < 0:
        raise ValueError(f"b must be >= 0, got {b}")
    if not 0.0 < r2 <= 1.0:
        raise ValueError(f"r2 must be in (0, 1], got {r2}")
    if hnorm2_over_xi2 < 0.0:
        raise ValueError(f"squared norm must be >= 0, got {hnorm2_over_xi2}")
    if xi <= 0.0:
        raise ValueError(f"xi must be positive, got {xi}")
    total = 0.0
    for i in range(b + 1):
        total += (math.comb(2 * b, 2 * i) * I_coeff(i, b, r2, method=method) * r2 ** i
                  * hermite(2 * i, gamma_v) * sigma_eval(2, b - i, hnorm2_over_xi2))
    return xi * total


def htilde_fiber(a, m, spin_norm_sq):
    """Closed form of the fiber-averaged product kernel:

        c_am(a, m) * sigma_eval(2, a+m, spin_norm_sq).
    """
    if a < 0 or m < 0:
        raise ValueError(f"indices must be >= 0, got ({a}, {m})")
    if spin_norm_sq < 0.0:
        raise ValueError(f"squared norm must be >= 0, got {spin_norm_sq}")
    return c_am(a, m) * sigma_eval(2, a + m, spin_norm_sq)


@dataclass(frozen=True)
class ChaosCoefficientTable:
    """Immutable kappa / I lookup for all chaos orders up to max_order.

    kappa is keyed by (alpha, beta) with 2(alpha+beta) <= max_order; the I
    table is keyed by (i, b) for i <= b <= max_order/2 (entries whose
    defining integral diverges at r2 = 0 are simply absent there).
    """

    r2: float
    level: float
    max_order: int
    kappa: dict
    I: dict

    @classmethod
    def build(cls, r2, t, max_order=DEFAULT_MAX_ORDER):
        if max_order < 0 or max_order % 2 != 0:
            raise ValueError(f"max_order must be a non-negative even integer, got {max_order}")
        if not 0.0 <= r2 <= 1.0:
            raise ValueError(f"r2 must be in [0, 1], got {r2}")
        half = max_order // 2
        kap = {}
        for alpha in range(half + 1):
            for beta_idx in range(half + 1 - alpha):
                kap[(alpha, beta_idx)] = kappa(alpha, beta_idx, r2, t)
        itab = {}
        for b in range(half + 1):
            for i in range(b + 1):
                if r2 == 0.0 and i >= 2:
                    continue
                itab[(i, b)] = I_coeff(i, b, r2)
        return cls(r2=float(r2), level=float(t), max_order=int(max_order),
                   kappa=kap, I=itab)

    @classmethod
    def from_profile(cls, profile, t, max_order=DEFAULT_MAX_ORDER):
        return cls.build(profile.r2, t, max_order=max_order)

    def kappa_value(self, alpha, beta_idx):
        try:
            return self.kappa[(alpha, beta_idx)]
        except KeyError:
            raise KeyError(
                f"(alpha, beta) = ({alpha}, {beta_idx}) exceeds table order "
                f"{self.max_order}") from None

    def pairs_of_order(self, q):
        """All (alpha, beta) with 2(alpha+beta) = q, ascending in alpha."""
        if q < 0 or q % 2 != 0:
            raise ValueError(f"chaos order must be even and >= 0, got {q}")
        if q > self.max_order:
            raise ValueError(f"order {q} exceeds table order {self.max_order}")
        return [(alpha, q // 2 - alpha) for alpha in range(q // 2 + 1)]

    def tampered(self, scale):
        """Copy with every kappa multiplied by scale (negative-control knob)."""
        return replace(self, kappa={k: v * scale for k, v in self.kappa.items()})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["alpha", "beta", "r2", "t", "kappa"])
            for (alpha, beta_idx), value in sorted(self.kappa.items()):
                writer.writerow([alpha, beta_idx, repr(self.r2), repr(self.level),
                                 repr(value)])

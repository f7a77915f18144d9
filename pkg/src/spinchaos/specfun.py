"""Scalar special functions used throughout the package.

Plain float/ndarray work with no dependency on the geometry or field modules:
probabilists' Hermite polynomials, log-gamma/Beta helpers, the Gauss
hypergeometric function on [0, 1], generalized Laguerre polynomials, and the
polynomial family obtained by averaging an even Hermite polynomial of a
linear functional over a round sphere (``sigma_poly``).
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

# 2F1 series control.  Below Z_SWITCH the defining power series converges
# fast enough; above it we route through the 1-z connection formula
# (DLMF 15.8.4) unless the parameter combination makes it unusable.
TWO_F_ONE_Z_SWITCH = 0.5
TWO_F_ONE_TOL = 1e-15
TWO_F_ONE_MAX_TERMS = 100_000


class DivergentSeriesError(ValueError):
    """The requested value is infinite or undefined (e.g. 2F1 at z=1 with
    c - a - b <= 0, or a sphere-average integral with a non-integrable pole)."""


class SeriesConvergenceError(RuntimeError):
    """A series failed to meet tolerance within the term budget.

    Carries the partial sum and the number of terms used so callers can
    report how far the evaluation got.
    """

    def __init__(self, message, partial_sum, terms_used):
        super().__init__(f"{message} (partial sum {partial_sum!r} after {terms_used} terms)")
        self.partial_sum = partial_sum
        self.terms_used = terms_used


def log_gamma(x):
    """Natural log of Gamma(x) for x > 0."""
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def beta(a, b):
    """Euler Beta function B(a, b) for positive arguments."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"beta requires positive arguments, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def double_factorial(n):
    """(n)!! for n >= -1 as an exact integer ((-1)!! = 0!! = 1)."""
    if n < -1:
        raise ValueError(f"double factorial undefined for n = {n}")
    out = 1
    for k in range(n, 1, -2):
        out *= k
    return out


def unit_sphere_area(n):
    """Surface measure of the unit n-sphere in R^(n+1): 2 pi^((n+1)/2) / Gamma((n+1)/2)."""
    if n < 0:
        raise ValueError(f"sphere dimension must be >= 0, got {n}")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


# ---------------------------------------------------------------------------
# Hermite polynomials (probabilists' normalization: He_{q+1} = x He_q - q He_{q-1})
# ---------------------------------------------------------------------------

def hermite(q, x):
    """Evaluate the probabilists' Hermite polynomial He_q at x (scalar or array)."""
    if q < 0:
        raise ValueError(f"Hermite order must be >= 0, got {q}")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    h_prev = np.ones_like(arr)
    if q == 0:
        return float(h_prev) if scalar else h_prev
    h = arr.copy()
    for k in range(1, q):
        h, h_prev = arr * h - k * h_prev, h
    return float(h) if scalar else h


@lru_cache(maxsize=None)
def hermite_coefficients(q):
    """Exact integer coefficients of He_q, ascending in the power of x."""
    if q < 0:
        raise ValueError(f"Hermite order must be >= 0, got {q}")
    coeffs = [1]
    prev = None
    for k in range(q):
        # multiply by x, subtract k * previous
        nxt = [0] + coeffs
        if prev is not None:
            for i, c in enumerate(prev):
                nxt[i] -= k * c
        prev, coeffs = coeffs, nxt
    return tuple(coeffs)


def hermite_even_at_zero(a):
    """He_{2a}(0) = (-1)^a (2a - 1)!!."""
    if a < 0:
        raise ValueError(f"index must be >= 0, got {a}")
    return float((-1) ** a * double_factorial(2 * a - 1))


# ---------------------------------------------------------------------------
# Generalized Laguerre polynomials
# ---------------------------------------------------------------------------

def laguerre(n, alpha, x):
    """Generalized Laguerre polynomial L_n^(alpha)(x), scalar or array x."""
    if n < 0:
        raise ValueError(f"Laguerre degree must be >= 0, got {n}")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    l_prev = np.ones_like(arr)
    if n == 0:
        return float(l_prev) if scalar else l_prev
    l_cur = 1.0 + alpha - arr
    for k in range(1, n):
        l_cur, l_prev = ((2 * k + 1 + alpha - arr) * l_cur - (k + alpha) * l_prev) / (k + 1), l_cur
    return float(l_cur) if scalar else l_cur


# ---------------------------------------------------------------------------
# Gauss hypergeometric function on [0, 1]
# ---------------------------------------------------------------------------

def _is_nonpositive_int(x, tol=1e-12):
    return x <= tol and abs(x - round(x)) < tol


def _gamma_quotient(num, den):
    """prod Gamma(num_i) / prod Gamma(den_j) with pole handling.

    A pole in the denominator makes the quotient vanish (1/Gamma at a
    nonpositive integer is 0); a pole in the numerator is an error here
    because callers route those cases elsewhere.  Negative non-integer
    arguments go through the reflection formula.
    """
    for x in num:
        if _is_nonpositive_int(x):
            raise DivergentSeriesError(f"Gamma pole at {x} in numerator")
    if any(_is_nonpositive_int(x) for x in den):
        return 0.0
    log_total = 0.0
    sign = 1.0
    for x in num:
        s, lg = _signed_log_gamma(x)
        sign *= s
        log_total += lg
    for x in den:
        s, lg = _signed_log_gamma(x)
        sign *= s
        log_total -= lg
    return sign * math.exp(log_total)


def _signed_log_gamma(x):
    """(sign, log |Gamma(x)|) for non-pole x, valid for negative arguments."""
    if x > 0.0:
        return 1.0, math.lgamma(x)
    # reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
    sinpix = math.sin(math.pi * x)
    sign = 1.0 if sinpix > 0 else -1.0
    return sign, math.log(math.pi / abs(sinpix)) - math.lgamma(1.0 - x)


def _gauss_2f1_series(a, b, c, z, max_terms=TWO_F_ONE_MAX_TERMS, tol=TWO_F_ONE_TOL):
    """Defining power series of 2F1.  Terminates early for polynomial cases."""
    total = 1.0
    term = 1.0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        if abs(term) <= tol * max(1.0, abs(total)):
            return total
    raise SeriesConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) series did not converge", total, max_terms)


def _gauss_2f1_at_one(a, b, c):
    d = c - a - b
    if d <= 0.0:
        raise DivergentSeriesError(
            f"2F1({a}, {b}; {c}; 1) diverges: c - a - b = {d} <= 0")
    return _gamma_quotient([c, d], [c - a, c - b])


def _gauss_2f1_connection(a, b, c, z):
    """2F1 near z = 1 via the 1-z connection formula, DLMF 15.8.4.

    Requires c - a - b not an integer (the prefactor Gammas are finite).
    """
    d = c - a - b
    w = 1.0 - z
    coef1 = _gamma_quotient([c, d], [c - a, c - b])
    coef2 = _gamma_quotient([c, -d], [a, b])
    part1 = coef1 * _gauss_2f1_series(a, b, 1.0 - d, w) if coef1 != 0.0 else 0.0
    part2 = coef2 * w ** d * _gauss_2f1_series(c - a, c - b, 1.0 + d, w) if coef2 != 0.0 else 0.0
    return part1 + part2


def gauss_2f1(a, b, c, z):
    """Gauss hypergeometric 2F1(a, b; c; z) for real parameters and z in [0, 1].

    The direct series is used for z <= 0.5 and for terminating (polynomial)
    cases; otherwise evaluation is routed through the 1-z connection formula.
    At z = 1 the Gauss summation formula applies when c - a - b > 0 and a
    DivergentSeriesError is raised when it does not.
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"gauss_2f1 requires z in [0, 1], got {z}")
    if _is_nonpositive_int(c):
        raise ValueError(f"gauss_2f1 undefined for c a nonpositive integer, got c = {c}")
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        # polynomial in z; the series terminates on its own at any z
        return _gauss_2f1_series(a, b, c, z)
    if z == 1.0:
        return _gauss_2f1_at_one(a, b, c)
    if z <= TWO_F_ONE_Z_SWITCH:
        return _gauss_2f1_series(a, b, c, z)
    d = c - a - b
    if abs(d - round(d)) < 1e-9:
        # integer c-a-b: the connection formula degenerates (log terms);
        # fall back to the raw series, which still converges for z < 1
        return _gauss_2f1_series(a, b, c, z)
    return _gauss_2f1_connection(a, b, c, z)


# ---------------------------------------------------------------------------
# Sphere averages of even Hermite polynomials
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _sigma_fractions(n, b):
    """Exact rational coefficients (ascending in y) of the sphere average of
    He_{2b}(<x, u>) over unit directions u in R^n, divided by the total
    measure of S^(n-1); y = |x|^2.

    Uses E[u_1^(2k)] = (2k-1)!! / (n (n+2) ... (n+2k-2)) for a uniform unit
    direction.
    """
    herm = hermite_coefficients(2 * b)
    out = []
    for k in range(b + 1):
        moment = Fraction(double_factorial(2 * k - 1))
        for j in range(k):
            moment /= (n + 2 * j)
        out.append(Fraction(herm[2 * k]) * moment)
    return tuple(out)


def sigma_poly(n, b):
    """Coefficients (ascending in y = |x|^2) of the unnormalized sphere average

        integral over S^(n-1) of He_{2b}(<x, u>) du

    as a polynomial of degree b in y.  The total measure of S^(n-1) is
    included, e.g. sigma_poly(2, 1) gives pi*(y - 2).
    """
    if n < 2:
        raise ValueError(f"ambient dimension must be >= 2, got {n}")
    if b < 0:
        raise ValueError(f"Hermite half-order must be >= 0, got {b}")
    area = unit_sphere_area(n - 1)
    return np.array([float(f) * area for f in _sigma_fractions(n, b)])


def sigma_eval(n, b, y):
    """Evaluate the sigma_poly(n, b) polynomial at y (scalar or array, y >= 0)."""
    coeffs = sigma_poly(n, b)
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("sigma_eval requires y >= 0 (y is a squared norm)")
    out = np.polynomial.polynomial.polyval(arr, coeffs)
    return float(out) if arr.ndim == 0 else out


def sigma_circle_mean(b, center, amplitude):
    """Mean of sigma_eval(2, b, center + amplitude*cos(w)) over the circle.

    Closed form through the even cosine moments (1/2pi) int cos^(2m) = C(2m,m)/4^m.
    Used where the argument of a sigma polynomial oscillates harmonically
    along a fiber and only its average contributes.  center and amplitude
    may be scalars or arrays (broadcast together); requires
    0 <= amplitude <= center so the argument stays non-negative.
    """
    coeffs = sigma_poly(2, b)
    c = np.asarray(center, dtype=float)
    a = np.asarray(amplitude, dtype=float)
    if np.any(a < -1e-12) or np.any(a > c + 1e-9):
        raise ValueError("need 0 <= amplitude <= center")
    a = np.clip(a, 0.0, None)
    out = np.zeros(np.broadcast(c, a).shape)
    for k, ck in enumerate(coeffs):
        if ck == 0.0:
            continue
        inner = 0.0
        for m in range(k // 2 + 1):
            inner = inner + (math.comb(k, 2 * m) * math.comb(2 * m, m) / 4.0 ** m
                             * c ** (k - 2 * m) * a ** (2 * m))
        out = out + ck * inner
    return float(out) if out.ndim == 0 else out


def sigma_variance(b):
    """Variance of sigma_poly(2, b) evaluated on a chi-squared(2) variable.

    Zero for b = 0 (the polynomial is the constant 2*pi); for b >= 1 it equals
    the closed form (2b)! * 4 pi^(3/2) * Gamma(b + 1/2) / b!.
    """
    if b < 0:
        raise ValueError(f"index must be >= 0, got {b}")
    if b == 0:
        return 0.0
    return sigma_variance_formula(b)


def sigma_variance_formula(b):
    """The literal closed form (2b)! * 4 pi^(3/2) * Gamma(b + 1/2) / b!.

    Coincides with sigma_variance for b >= 1; at b = 0 it evaluates to
    4 pi^2, which bounds (2a)! * 4 pi^2 with equality exactly at a = 0,
    while the variance of the constant polynomial itself is 0.
    """
    if b < 0:
        raise ValueError(f"index must be >= 0, got {b}")
    return (math.factorial(2 * b) * 4.0 * math.pi ** 1.5
            * math.gamma(b + 0.5) / math.factorial(b))

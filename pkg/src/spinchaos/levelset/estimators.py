"""Monte Carlo estimators for level-set areas and their chaos components.

The area of the level set {f = t} over a spherical region D decomposes into
uncorrelated components indexed by even chaos order q.  Each component is a
quadrature sum over D of products of two fiber-invariant node quantities:

    L[q] = xi * exp(-t^2/2) * sum_{a+b=q/2} kappa(a, b, r2, t)
           * sum_nodes w * Sigma_a(|X|^2) * CircleMean_b(mu/xi^2, rho/xi^2)

for spin != 0, where |X| is the spin norm and (mu, rho) are the fiber
invariants of the squared horizontal gradient.  For spin 0 the field and its
gradient are themselves constant along fibers and the component reads

    L[q] = xi * exp(-t^2/2) * sum_{a+b=q/2} kappa(a, b, 0, t)
           * sum_nodes w * 2 pi * H_{2a}(f) * Sigma_b(|grad_H f|^2 / xi^2).

Estimators draw realizations by index from a master seed, so results are
deterministic and independent of the worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..chaoscoef import ChaosCoefficientTable
from ..so3geom import fiber_points, horizontal_components
from ..spinfield import (
    evaluate,
    horizontal_gradient_invariants,
    jet,
    jet_many,
    sample,
)
from ..specfun import hermite, sigma_circle_mean, sigma_eval
from .marching import EulerGrid, extract_level_surface
from .quadrature import quadrature_chart_angles, sphere_quadrature

TWO_PI = 2.0 * math.pi

# nodes spot-checked for fiber invariance before each quadrature pass
FIBER_CHECK_NODES = 4
FIBER_TOL = 1e-7

# floor on the full-sphere quadrature size when the caller does not supply one
DEFAULT_QUAD_POINTS = 400


class FiberInvarianceError(RuntimeError):
    """A quantity that must be constant along fibers failed the spot check."""


@dataclass(frozen=True)
class EstimatorReport:
    """Outcome of a Monte Carlo estimator run."""

    estimate: float
    stderr: float
    n_samples: int
    seed: int
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "metadata": dict(self.metadata),
        }


def component_quadrature(profile, q):
    """Full-sphere quadrature sized to the order-q component integrand.

    The integrand of an order-q component is a degree-q polynomial in the
    field and its gradient, so its harmonic content extends to degree about
    q times the profile's top degree.  The node count is matched to the
    dimension of that space, (q * max_degree + 1)^2, floored at
    DEFAULT_QUAD_POINTS; beyond this size the components are observed to be
    stable to about 1e-3 relative.
    """
    bandwidth = max(1, q) * profile.max_degree
    return sphere_quadrature("full", max(DEFAULT_QUAD_POINTS,
                                         (bandwidth + 1) ** 2))


def _validate_table(profile, t, table):
    if abs(table.level - t) > 1e-12:
        raise ValueError(
            f"table was built at level {table.level}, estimator asked for {t}")
    if abs(table.r2 - profile.r2) > 1e-12:
        raise ValueError(
            f"table r2 = {table.r2} does not match profile r2 = {profile.r2}")


def check_fiber_invariance(realization, quad, k=FIBER_CHECK_NODES, tol=FIBER_TOL):
    """Spot-check the fiber invariance of the estimator's node quantities.

    At a few quadrature nodes, re-evaluate the spin norm and the horizontal
    gradient invariants at k equally spaced fiber points and compare against
    the base-point values.  For spin 0 the field value and the squared
    horizontal gradient are checked directly.  Raises FiberInvarianceError
    on disagreement beyond tol (relative, floored at 1).
    """
    if k < 1:
        return
    prof = realization.profile
    n_check = min(FIBER_CHECK_NODES, quad.n_points)
    for x in quad.points[:n_check]:
        pts = fiber_points(x, k)
        base = pts[0]
        if prof.spin != 0:
            ref = [abs(evaluate(realization, base))]
            ref.extend(horizontal_gradient_invariants(realization, x))
            for p in pts[1:]:
                j = jet(realization, p)
                z1, z2 = horizontal_components(j.complex_gradient, p.theta)
                got = [abs(j.complex_value),
                       0.5 * (abs(z1) ** 2 + abs(z2) ** 2),
                       0.5 * abs(z1 * z1 + z2 * z2)]
                for name, a, b in zip(("spin norm", "gradient mean",
                                       "gradient amplitude"), ref, got):
                    if abs(a - b) > tol * max(1.0, abs(a)):
                        raise FiberInvarianceError(
                            f"{name} varies along the fiber over {x}: "
                            f"{a} vs {b} at psi = {p.psi}")
        else:
            j0 = jet(realization, base)
            g1, g2 = horizontal_components(
                tuple(g.real for g in j0.complex_gradient), base.theta)
            ref = [j0.value, g1 * g1 + g2 * g2]
            for p in pts[1:]:
                j = jet(realization, p)
                h1, h2 = horizontal_components(
                    tuple(g.real for g in j.complex_gradient), p.theta)
                got = [j.value, h1 * h1 + h2 * h2]
                for name, a, b in zip(("field value", "gradient norm"), ref, got):
                    if abs(a - b) > tol * max(1.0, abs(a)):
                        raise FiberInvarianceError(
                            f"{name} varies along the fiber over {x}: "
                            f"{a} vs {b} at psi = {p.psi}")


def _node_invariants(realization, quad):
    """Fiber-invariant node data for the quadrature sum, all nodes at once."""
    phi, theta = quadrature_chart_angles(quad)
    j = jet_many(realization, phi, theta, np.zeros_like(phi))
    if realization.profile.spin != 0:
        sn2 = np.abs(j.complex_value) ** 2
        z1, z2 = horizontal_components(j.complex_gradient, theta)
        mu = 0.5 * (np.abs(z1) ** 2 + np.abs(z2) ** 2)
        rho = 0.5 * np.abs(z1 * z1 + z2 * z2)
        return sn2, mu, rho
    f = j.complex_value.real
    h1, h2 = horizontal_components(tuple(g.real for g in j.complex_gradient),
                                   theta)
    return f, h1 * h1 + h2 * h2


def _components_for_orders(realization, orders, t, quad, table, fiber_check):
    """Chaos components for several orders, sharing one field evaluation."""
    prof = realization.profile
    _validate_table(prof, t, table)
    for q in orders:
        if q % 2 != 0:
            raise ValueError(f"odd chaos components vanish identically (q = {q})")
        if not 0 <= q <= table.max_order:
            raise ValueError(f"order q = {q} outside table range 0..{table.max_order}")
    if fiber_check:
        check_fiber_invariance(realization, quad, k=fiber_check)
    xi2 = prof.xi2
    scale = prof.xi * math.exp(-0.5 * t * t)
    if prof.spin != 0:
        sn2, mu, rho = _node_invariants(realization, quad)
        value_factor = lambda a: sigma_eval(2, a, sn2)
        grad_factor = lambda b: sigma_circle_mean(b, mu / xi2, rho / xi2)
    else:
        f, hsq = _node_invariants(realization, quad)
        value_factor = lambda a: TWO_PI * hermite(2 * a, f)
        grad_factor = lambda b: sigma_eval(2, b, hsq / xi2)
    out = []
    for q in orders:
        total = 0.0
        for alpha, beta_idx in table.pairs_of_order(q):
            integrand = value_factor(alpha) * grad_factor(beta_idx)
            total += table.kappa_value(alpha, beta_idx) * quad.integrate(integrand)
        out.append(scale * total)
    return out


def chaos_component(realization, q, t, quad, table, fiber_check=FIBER_CHECK_NODES):
    """Quadrature estimate of the order-q chaos component of the level-set area.

    q must be even and within the table's order range; the table must have
    been built for the realization's spectral ratio r2 and for level t.  The
    component of order 0 is deterministic: it equals the expected area
    xi * kappa(0, 0) * exp(-t^2/2) * (2 pi)^2 * area(D).  Before integrating,
    fiber invariance of the node quantities is spot-checked at fiber_check
    equally spaced fiber points (0 disables the check).
    """
    return _components_for_orders(realization, (q,), t, quad, table,
                                  fiber_check)[0]


def _sample_task(args):
    """One realization's worth of estimator samples (module level to pickle)."""
    profile, t, orders, quad, table, grid, seed, index = args
    r = sample(profile, seed, index=index)
    out = []
    if grid is not None:
        out.append(extract_level_surface(r, t, grid).total_area)
    if orders:
        out.extend(_components_for_orders(r, orders, t, quad, table,
                                          FIBER_CHECK_NODES))
    return tuple(out)


def _run_samples(profile, t, orders, quad, table, grid, n, seed, workers):
    """Rows of per-realization samples, reduced in index order."""
    tasks = [(profile, t, orders, quad, table, grid, seed, i) for i in range(n)]
    if workers <= 1:
        rows = [_sample_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, n // (4 * workers))
            rows = list(pool.map(_sample_task, tasks, chunksize=chunk))
    return np.array(rows, dtype=float)


def _as_grid(grid):
    return grid if isinstance(grid, EulerGrid) else EulerGrid(grid)


def mc_expectation(profile, t, grid, n, seed, workers=1):
    """Monte Carlo mean of the level-set area over xi on the full sphere.

    Draws n independent realizations from the master seed, extracts the
    level surface on the grid, and reports mean and standard error of
    total_area / xi.  The grid's polar half-cell offsets omit two thin
    theta slabs; the corresponding volume fraction and a proportional
    area bias bound are recorded in the metadata.
    """
    if n < 30:
        raise ValueError(f"need at least 30 realizations for a stable stderr, got {n}")
    grid = _as_grid(grid)
    rows = _run_samples(profile, t, (), None, None, grid, n, seed, workers)
    areas = rows[:, 0] / profile.xi
    estimate = float(np.mean(areas))
    stderr = float(np.std(areas, ddof=1) / math.sqrt(n))
    frac = grid.theta_slab_volume_fraction
    meta = {
        "profile": profile.to_dict(),
        "level": t,
        "region": "full",
        "grid": list(grid.resolution),
        "theta_slab_volume_fraction": frac,
        "area_bias_bound": estimate * frac / (1.0 - frac),
    }
    return EstimatorReport(estimate=estimate, stderr=stderr, n_samples=n,
                           seed=seed, metadata=meta)


def mc_orthogonality(profile, t, q1, q2, n, seed, quad=None, table=None,
                     workers=1):
    """Empirical covariance of two chaos components across realizations.

    Components of distinct even orders are uncorrelated, so the estimate
    should vanish within its standard error; with q1 == q2 this is the
    sample variance of the component.  The covariance uses the unbiased
    1/(n-1) normalization and the stderr is the standard error of the
    centered products.
    """
    for q in (q1, q2):
        if q % 2 != 0 or q < 2:
            raise ValueError(f"chaos order must be even and >= 2, got {q}")
    if n < 2:
        raise ValueError(f"need at least two realizations, got {n}")
    if quad is None:
        quad = component_quadrature(profile, max(q1, q2))
    if table is None:
        table = ChaosCoefficientTable.from_profile(profile, t,
                                                   max_order=max(q1, q2))
    orders = (q1,) if q1 == q2 else (q1, q2)
    rows = _run_samples(profile, t, orders, quad, table, None, n, seed, workers)
    c1 = rows[:, 0]
    c2 = rows[:, -1]
    prods = (c1 - c1.mean()) * (c2 - c2.mean())
    estimate = float(prods.sum() / (n - 1))
    stderr = float(np.std(prods, ddof=1) / math.sqrt(n))
    meta = {
        "profile": profile.to_dict(),
        "level": t,
        "region": quad.region if isinstance(quad.region, str) else list(quad.region),
        "orders": [q1, q2],
        "n_quadrature": quad.n_points,
    }
    return EstimatorReport(estimate=estimate, stderr=stderr, n_samples=n,
                           seed=seed, metadata=meta)


def mc_truncation(profile, t, Q, grid, quad, n, seed, table=None, workers=1):
    """Residual variance of the measured area after truncated chaos sums.

    Returns a list of (Q', residual variance) for Q' = 0, 2, ..., Q, where
    the residual of a realization is its measured area minus the chaos
    components of orders <= Q'.  The order-0 component is deterministic, so
    the Q' = 0 row is exactly the sample variance of the measured areas.
    """
    if Q % 2 != 0 or Q < 0:
        raise ValueError(f"truncation order must be a non-negative even integer, got {Q}")
    if n < 2:
        raise ValueError(f"need at least two realizations, got {n}")
    if table is None:
        table = ChaosCoefficientTable.from_profile(profile, t, max_order=max(Q, 2))
    if Q > table.max_order:
        raise ValueError(f"Q = {Q} exceeds table order {table.max_order}")
    grid = _as_grid(grid)
    orders = tuple(range(2, Q + 1, 2))
    rows = _run_samples(profile, t, orders, quad, table, grid, n, seed, workers)
    areas = rows[:, 0]
    out = [(0, float(np.var(areas, ddof=1)))]
    residual = areas.copy()
    for j, q in enumerate(orders):
        residual = residual - rows[:, 1 + j]
        out.append((q, float(np.var(residual, ddof=1))))
    return out

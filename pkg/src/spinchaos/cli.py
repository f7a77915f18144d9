"""Configuration-driven command line for coefficient dumps and experiments.

Commands: coeffs, expectation, chaos, validate, simulate.  All state comes
from a JSON config plus a handful of overriding flags; there is no
wall-clock seeding and no environment variable input, so identical invocations
produce identical output bytes regardless of the worker count.
"""

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .chaoscoef import (
    ChaosCoefficientTable,
    I_coeff,
    expected_area_density,
    kappa,
    kappa_via_I,
    s0_normalization_check,
)
from .levelset import (
    EulerGrid,
    check_fiber_invariance,
    component_quadrature,
    extract_level_surface,
    mc_expectation,
    mc_orthogonality,
    mc_truncation,
    mesh_to_off,
    sphere_quadrature,
)
from .levelset.estimators import _run_samples
from .so3geom import EulerPoint, euler_to_matrix
from .specfun import hermite
from .spinfield import SpectralProfile, covariance, evaluate, sample

MIN_STATISTICAL_N = 30

DEFAULT_PROFILE = {"spin": 2, "bands": [[5, math.sqrt(2.0)]]}


class ConfigError(ValueError):
    """Invalid or unusable configuration (maps to exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters; the seed may be absent for dumps."""

    profile: SpectralProfile
    level: float
    grid: tuple
    quadrature: int
    order: int
    n_realizations: int
    seed: object
    region: object
    out: str

    @classmethod
    def from_dict(cls, data):
        known = {"profile", "level", "grid", "quadrature", "order",
                 "n_realizations", "seed", "region", "out"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            profile = SpectralProfile.from_dict(data.get("profile", DEFAULT_PROFILE))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad profile: {exc}") from exc
        level = float(data.get("level", 0.0))
        grid = data.get("grid", 32)
        if isinstance(grid, (list, tuple)):
            if len(grid) != 3:
                raise ConfigError(f"grid must be an integer or three integers, got {grid}")
            grid = tuple(int(g) for g in grid)
        else:
            grid = (int(grid),) * 3
        order = int(data.get("order", 4))
        if order < 0 or order % 2 != 0:
            raise ConfigError(f"order must be a non-negative even integer, got {order}")
        quadrature = data.get("quadrature")
        if quadrature is None:
            quadrature = component_quadrature(profile, order).n_points
        else:
            quadrature = int(quadrature)
            if quadrature < 16:
                raise ConfigError(f"quadrature size must be at least 16, got {quadrature}")
        n_real = int(data.get("n_realizations", 50))
        if n_real < 1:
            raise ConfigError(f"n_realizations must be positive, got {n_real}")
        seed = data.get("seed")
        if seed is not None:
            seed = int(seed)
            if seed < 0:
                raise ConfigError(f"seed must be a non-negative integer, got {seed}")
        region = data.get("region", "full")
        if isinstance(region, (list, tuple)):
            if len(region) != 2 or region[0] != "cap":
                raise ConfigError(f"region must be \"full\" or [\"cap\", theta_max], got {region}")
            region = ("cap", float(region[1]))
        elif region != "full":
            raise ConfigError(f"region must be \"full\" or [\"cap\", theta_max], got {region}")
        return cls(profile=profile, level=level, grid=grid, quadrature=quadrature,
                   order=order, n_realizations=n_real, seed=seed, region=region,
                   out=str(data.get("out", ".")))

    def to_dict(self):
        return {
            "profile": self.profile.to_dict(),
            "level": self.level,
            "grid": list(self.grid),
            "quadrature": self.quadrature,
            "order": self.order,
            "n_realizations": self.n_realizations,
            "seed": self.seed,
            "region": self.region if isinstance(self.region, str) else list(self.region),
            "out": self.out,
        }

    def require_seed(self):
        if self.seed is None:
            raise ConfigError("a master seed is required (set \"seed\" or pass --seed)")
        return self.seed

    def content_hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_config(args):
    data = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key in ("seed", "out", "order"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if getattr(args, "grid", None) is not None:
        data["grid"] = args.grid
    return ExperimentConfig.from_dict(data)


def _write_json(path, payload):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([x if isinstance(x, (int, str)) else repr(float(x))
                             for x in row])


def _out_dir(config):
    from pathlib import Path

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _analytic_target(config):
    prof = config.profile
    return 4.0 * math.pi * expected_area_density(config.level, prof.spin, prof.xi)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_coeffs(config, workers=1):
    prof = config.profile
    table = ChaosCoefficientTable.build(prof.r2, config.level,
                                        max_order=config.order)
    out = _out_dir(config)
    table.to_csv(out / "kappa.csv")
    _write_csv(out / "icoeff.csv", ["i", "b", "r2", "I"],
               [(i, b, repr(table.r2), v)
                for (i, b), v in sorted(table.I.items())])
    print(f"wrote {out / 'kappa.csv'} ({len(table.kappa)} rows) and "
          f"{out / 'icoeff.csv'} ({len(table.I)} rows)")
    return 0


def cmd_expectation(config, workers=1):
    seed = config.require_seed()
    if config.n_realizations < MIN_STATISTICAL_N:
        raise ConfigError(
            f"expectation needs n_realizations >= {MIN_STATISTICAL_N}, "
            f"got {config.n_realizations}")
    rep = mc_expectation(config.profile, config.level, EulerGrid(config.grid),
                         config.n_realizations, seed, workers=workers)
    target = _analytic_target(config)
    z = (rep.estimate - target) / rep.stderr
    out = _out_dir(config)
    _write_json(out / "expectation.json", {
        "config": config.to_dict(),
        "config_hash": config.content_hash(),
        "estimate": rep.estimate,
        "stderr": rep.stderr,
        "analytic": target,
        "z": z,
        "n_samples": rep.n_samples,
        "metadata": rep.metadata,
    })
    print(f"estimate {rep.estimate:.6f} +- {rep.stderr:.6f}, "
          f"analytic {target:.6f}, z = {z:.2f} -> {out / 'expectation.json'}")
    return 1 if abs(z) > 4.0 else 0


def cmd_chaos(config, workers=1):
    seed = config.require_seed()
    prof = config.profile
    quad = sphere_quadrature(config.region, config.quadrature)
    table = ChaosCoefficientTable.from_profile(prof, config.level,
                                               max_order=max(config.order, 2))
    rows = mc_truncation(prof, config.level, config.order, EulerGrid(config.grid),
                         quad, config.n_realizations, seed, table=table,
                         workers=workers)
    out = _out_dir(config)
    _write_csv(out / "truncation.csv", ["Q", "residual_variance"], rows)
    orders = tuple(range(2, max(config.order, 2) + 1, 2))
    comps = _run_samples(prof, config.level, orders, quad, table, None,
                         config.n_realizations, seed, workers)
    cov = np.cov(comps.T, ddof=1).reshape(len(orders), len(orders))
    _write_csv(out / "chaos_covariance.csv",
               ["order"] + [str(q) for q in orders],
               [[q] + list(cov[i]) for i, q in enumerate(orders)])
    print(f"wrote {out / 'truncation.csv'} and {out / 'chaos_covariance.csv'} "
          f"(orders {list(orders)})")
    return 0


def cmd_simulate(config, workers=1):
    seed = config.require_seed()
    r = sample(config.profile, seed, index=0)
    mesh = extract_level_surface(r, config.level, EulerGrid(config.grid))
    out = _out_dir(config)
    mesh_to_off(mesh, out / "mesh.off")
    _write_json(out / "simulate.json", {
        "config": config.to_dict(),
        "config_hash": config.content_hash(),
        "n_triangles": mesh.n_triangles,
        "total_area": mesh.total_area,
        "area_over_xi": mesh.total_area / config.profile.xi,
    })
    print(f"wrote {out / 'mesh.off'} ({mesh.n_triangles} triangles, "
          f"area {mesh.total_area:.4f})")
    return 0


# ---------------------------------------------------------------------------
# Validation suites
# ---------------------------------------------------------------------------

def _deterministic_checks(config, table):
    prof = config.profile
    t = config.level
    checks = []

    # q = 0 reduction of the configured table against the area density
    want = expected_area_density(t, prof.spin, prof.xi)
    got = table.kappa_value(0, 0) * (2.0 * math.pi) ** 2 * math.exp(-0.5 * t * t)
    err = abs(got / want - 1.0)
    checks.append(("q0-reduction", err < 1e-10, f"rel err {err:.2e}"))

    # the same identity across seeded (s, xi, t) draws
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(50):
        s = int(rng.integers(0, 4))
        xi = math.sqrt(float(rng.uniform(max(1.0, s * s), 200.0)))
        tt = float(rng.uniform(-2.0, 2.0))
        r2 = s * s / (xi * xi)
        got = kappa(0, 0, r2, tt) * (2.0 * math.pi) ** 2 * math.exp(-0.5 * tt * tt)
        worst = max(worst, abs(got / expected_area_density(tt, s, xi) - 1.0))
    checks.append(("kappa-density-50", worst < 1e-10, f"max rel err {worst:.2e}"))

    worst = max(abs(s0_normalization_check(a, b) - 1.0)
                for a in range(7) for b in range(7))
    checks.append(("s0-normalization", worst < 1e-12, f"max |ratio-1| {worst:.2e}"))

    # Hermite addition on seeded triples
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        x, y = rng.standard_normal(2)
        c = math.cos(0.9)
        s_ = math.sin(0.9)
        for q in range(0, 9):
            lhs = hermite(q, c * x + s_ * y)
            rhs = math.fsum(
                math.comb(q, i) * c ** i * s_ ** (q - i)
                * hermite(i, x) * hermite(q - i, y) for i in range(q + 1))
            worst = max(worst, abs(lhs - rhs))
    checks.append(("hermite-addition", worst < 1e-9, f"max abs err {worst:.2e}"))

    # closed-form I against its defining integral at a safe r2
    r2 = prof.r2 if prof.r2 >= 0.25 else 0.5
    worst = max(abs(I_coeff(i, b, r2, method="closed")
                    / I_coeff(i, b, r2, method="quadrature") - 1.0)
                for b in range(4) for i in range(b + 1))
    checks.append(("icoeff-quadrature", worst < 1e-8, f"max rel err {worst:.2e}"))

    worst = max(abs(kappa(a, b, r2, t) - kappa_via_I(a, b, r2, t))
                for a in range(3) for b in range(3))
    checks.append(("kappa-via-I", worst < 1e-10, f"max abs err {worst:.2e}"))

    for region, area in (("full", 4.0 * math.pi),
                         (("cap", 0.7), 2.0 * math.pi * (1.0 - math.cos(0.7)))):
        quad = sphere_quadrature(region, 200)
        err = abs(quad.weights.sum() - area)
        name = region if isinstance(region, str) else f"cap({region[1]})"
        checks.append((f"quadrature-weights-{name}", err < 1e-10, f"abs err {err:.2e}"))

    # spin identities on a couple of seeded realizations
    worst = 0.0
    for seed in (11, 12):
        r = sample(prof, seed, index=0)
        rng = np.random.default_rng(seed)
        for _ in range(5):
            p = EulerPoint(float(rng.uniform(-3, 3)),
                           float(rng.uniform(0.3, math.pi - 0.3)),
                           float(rng.uniform(-3, 3)))
            base = evaluate(r, EulerPoint(p.phi, p.theta, 0.0))
            spun = evaluate(r, p)
            worst = max(worst, abs(spun - base * np.exp(-1j * prof.spin * p.psi)))
        quad = sphere_quadrature("full", 16)
        try:
            check_fiber_invariance(r, quad)
        except Exception as exc:  # pragma: no cover - failure path
            checks.append(("fiber-invariance", False, str(exc)))
            break
    else:
        checks.append(("fiber-invariance", True, "4 nodes x 4 fiber points"))
    checks.append(("spin-rotation-phase", worst < 1e-7, f"max abs err {worst:.2e}"))

    # covariance depends only on the relative rotation
    rot = euler_to_matrix(EulerPoint(0.8, 1.1, -0.5))
    p1 = euler_to_matrix(EulerPoint(0.3, 1.4, 2.0))
    p2 = euler_to_matrix(EulerPoint(-1.2, 0.7, 0.4))
    err = abs(covariance(prof, p1, p2) - covariance(prof, rot @ p1, rot @ p2))
    checks.append(("covariance-invariance", err < 1e-7, f"abs err {err:.2e}"))
    return checks


def _statistical_checks(config, workers):
    prof = config.profile
    seed = config.require_seed()
    n = config.n_realizations
    checks = []

    rep = mc_orthogonality(prof, config.level, 2, 2, n, seed, workers=workers)
    # reuse the component samples' mean through a direct pass
    quad = component_quadrature(prof, 2)
    table = ChaosCoefficientTable.from_profile(prof, config.level, max_order=2)
    comps = _run_samples(prof, config.level, (2,), quad, table, None, n, seed,
                         workers)[:, 0]
    se = comps.std(ddof=1) / math.sqrt(n)
    z = comps.mean() / se
    checks.append(("chaos2-centered", abs(z) < 4.0, f"z = {z:.2f} over n = {n}"))
    checks.append(("component-variance-positive", rep.estimate > 0.0,
                   f"var = {rep.estimate:.4f}"))

    # the level dependence of the mean area is exp(-t^2/2); the ratio of two
    # estimates cancels the common grid bias
    grid = EulerGrid(config.grid)
    rep0 = mc_expectation(prof, 0.0, grid, n, seed, workers=workers)
    rep1 = mc_expectation(prof, 1.0, grid, n, seed + 1, workers=workers)
    ratio = rep1.estimate / rep0.estimate
    se = ratio * math.hypot(rep0.stderr / rep0.estimate,
                            rep1.stderr / rep1.estimate)
    dev = abs(ratio - math.exp(-0.5))
    checks.append(("expectation-level-scaling", dev < 4.0 * se,
                   f"ratio {ratio:.4f} vs {math.exp(-0.5):.4f}, 4se = {4 * se:.4f}"))
    return checks


def cmd_validate(config, workers=1, tamper=None):
    table = ChaosCoefficientTable.from_profile(config.profile, config.level,
                                               max_order=max(config.order, 2))
    if tamper is not None:
        table = table.tampered(tamper)
    checks = _deterministic_checks(config, table)
    deterministic_ok = all(ok for _, ok, _ in checks)
    refused = None
    if config.seed is None:
        refused = "statistical suite refused: no master seed"
    elif config.n_realizations < MIN_STATISTICAL_N:
        refused = (f"statistical suite refused: n_realizations = "
                   f"{config.n_realizations} < {MIN_STATISTICAL_N}")
    if refused is None:
        checks.extend(_statistical_checks(config, workers))
    for name, ok, detail in checks:
        print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    if refused is not None:
        print(refused)
        return 2 if deterministic_ok else 1
    return 0 if all(ok for _, ok, _ in checks) else 1


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="spinchaos",
        description="Level-set chaos experiments for spin fields on the rotation group")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--workers", type=int, default=1,
                        help="parallel sampling processes")
    common.add_argument("--grid", type=int, help="grid resolution per axis")
    common.add_argument("--order", type=int, help="chaos order cap")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common],
                   help="dump kappa and I coefficient tables")
    sub.add_parser("expectation", parents=[common],
                   help="Monte Carlo mean area against the analytic value")
    sub.add_parser("chaos", parents=[common],
                   help="truncation residuals and component covariances")
    val = sub.add_parser("validate", parents=[common],
                         help="run deterministic and statistical check suites")
    val.add_argument("--debug-tamper-kappa", type=float, default=None,
                     help="scale the kappa table (negative control)")
    sub.add_parser("simulate", parents=[common],
                   help="sample one realization and export its level mesh")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        config = load_config(args)
        if args.command == "coeffs":
            return cmd_coeffs(config, workers=args.workers)
        if args.command == "expectation":
            return cmd_expectation(config, workers=args.workers)
        if args.command == "chaos":
            return cmd_chaos(config, workers=args.workers)
        if args.command == "validate":
            return cmd_validate(config, workers=args.workers,
                                tamper=args.debug_tamper_kappa)
        if args.command == "simulate":
            return cmd_simulate(config, workers=args.workers)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Level-set extraction, spherical quadrature, and Monte Carlo estimators."""

from .estimators import (
    EstimatorReport,
    FiberInvarianceError,
    chaos_component,
    check_fiber_invariance,
    component_quadrature,
    mc_expectation,
    mc_orthogonality,
    mc_truncation,
)
from .marching import (
    EulerGrid,
    LevelSurfaceMesh,
    extract_level_surface,
    mesh_to_off,
    sphere_level_curve_length,
)
from .quadrature import (
    SphereQuadrature,
    quadrature_chart_angles,
    region_area,
    sphere_quadrature,
)

__all__ = [
    "EstimatorReport",
    "EulerGrid",
    "FiberInvarianceError",
    "LevelSurfaceMesh",
    "SphereQuadrature",
    "chaos_component",
    "check_fiber_invariance",
    "component_quadrature",
    "extract_level_surface",
    "mc_expectation",
    "mc_orthogonality",
    "mc_truncation",
    "mesh_to_off",
    "quadrature_chart_angles",
    "region_area",
    "sphere_level_curve_length",
    "sphere_quadrature",
]

"""Chaos expansions and level-set geometry for spin-weighted Gaussian fields
on the rotation group."""

__version__ = "0.1.0"

from . import chaoscoef, levelset, so3geom, specfun, spinfield  # noqa: F401

"""Exception types shared across the package."""

from __future__ import annotations


class FpsiError(Exception):
    """Base class for all package errors."""


class GridError(FpsiError):
    """Invalid grid construction or mismatched discretizations."""


class ConfigError(FpsiError):
    """Invalid or inconsistent run configuration."""


class GeometryError(FpsiError):
    """Degenerate geometry: vanishing Jacobian or singular deformation."""


class CompatibilityError(FpsiError):
    """Initial data violating the interface compatibility conditions."""


class SolveError(FpsiError):
    """Linear solve failed or produced a non-finite / inaccurate solution."""

"""Geodesics between events of standard stationary spacetimes."""

from .curves import SpacetimePolyline, SpatialPolyline, straight_line
from .field_expr import FieldExpr, parse
from .functional import ProblemInstance, reduced_action, time_reconstruction
from .metric import StationarySpacetime, build_spacetime, registry_get
from .solver import SolveConfig, minimize, multistart
from .verify import diagnose, verify_curve

__all__ = [
    "FieldExpr",
    "ProblemInstance",
    "SolveConfig",
    "SpacetimePolyline",
    "SpatialPolyline",
    "StationarySpacetime",
    "build_spacetime",
    "diagnose",
    "minimize",
    "multistart",
    "parse",
    "reduced_action",
    "registry_get",
    "straight_line",
    "time_reconstruction",
    "verify_curve",
]

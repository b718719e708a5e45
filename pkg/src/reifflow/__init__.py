"""Curve shortening flow of rough planar curves.

Modules
-------
geom_core
    Curves, Hausdorff distances, flatness certificates and discrete curvature.
fractal_gen
    Koch-type snowflakes and smooth test shapes.
mollifier
    Smooth approximations X^r of a curve by mollifying its indicator.
flow_levelset
    Narrow-band level-set curve shortening flow.
flow_graph
    Graph curve shortening flow and the heat equation in one dimension.
harness
    Experiment configs, scale sweeps, power-law fits and reports.
"""

from .errors import (
    AvoidanceFailure,
    DomainError,
    EmptyIntersectionError,
    EmptyResultError,
    FlowExtinctError,
    NotAGraphError,
    NumericalBlowupError,
    ResolutionError,
    ResourceError,
    TopologyError,
)
from .fractal_gen import KochSpec, circle_curve, koch_variant
from .geom_core import Curve, Line, hausdorff_distance, reifenberg_certificate, sup_curvature
from .mollifier import GridSpec, ScalarField, approximate
from .flow_levelset import evolve, fattening_gap
from .flow_graph import GraphState, evolve_graph

__version__ = "0.1.0"

__all__ = [
    "AvoidanceFailure",
    "DomainError",
    "EmptyIntersectionError",
    "EmptyResultError",
    "FlowExtinctError",
    "NotAGraphError",
    "NumericalBlowupError",
    "ResolutionError",
    "ResourceError",
    "TopologyError",
    "KochSpec",
    "circle_curve",
    "koch_variant",
    "Curve",
    "Line",
    "hausdorff_distance",
    "reifenberg_certificate",
    "sup_curvature",
    "GridSpec",
    "ScalarField",
    "approximate",
    "evolve",
    "fattening_gap",
    "GraphState",
    "evolve_graph",
]

"""Test shapes: Koch snowflake variants with tunable tent angle, circles, ellipses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResourceError
from .geom_core import Curve

MAX_VERTICES = 4_000_000


@dataclass(frozen=True)
class KochSpec:
    beta: float = math.pi / 3
    depth: int = 4
    base_side: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.beta < math.pi / 2:
            raise DomainError(f"beta must lie in (0, pi/2), got {self.beta}")
        if not 0 <= self.depth <= 10:
            raise DomainError(f"depth must lie in [0, 10], got {self.depth}")
        if not self.base_side > 0:
            raise DomainError("base_side must be positive")

    @property
    def piece_ratio(self) -> float:
        """Length of each of the four pieces relative to the parent edge."""
        return 1.0 / (2.0 + 2.0 * math.cos(self.beta))

    def segment_length(self) -> float:
        return self.base_side * self.piece_ratio**self.depth


def _refine(v: np.ndarray, beta: float) -> np.ndarray:
    ell = 1.0 / (2.0 + 2.0 * math.cos(beta))
    d = np.roll(v, -1, axis=0) - v
    # rotating by -beta points the tent to the right of a ccw edge, i.e. outward
    c, s = math.cos(beta), math.sin(beta)
    d_tent = np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])
    a = v + ell * d
    apex = a + ell * d_tent
    b = v + (1.0 - ell) * d
    out = np.empty((4 * len(v), 2))
    out[0::4] = v
    out[1::4] = a
    out[2::4] = apex
    out[3::4] = b
    return out


def koch_variant(spec: KochSpec) -> Curve:
    """Koch snowflake whose tents have base angle ``spec.beta``.

    Each edge is cut into four pieces of equal length ``l`` with
    ``2 l + 2 l cos(beta)`` equal to the edge, the middle two forming an
    outward tent.  Edge endpoints are kept, so every generation's vertices are
    vertices of all later generations.  ``beta = pi/3`` is the classical curve.
    """
    count = 3 * 4**spec.depth
    if count > MAX_VERTICES:
        raise ResourceError(f"{count} vertices exceeds the limit of {MAX_VERTICES}")
    s = spec.base_side
    v = np.array([[0.0, 0.0], [s, 0.0], [0.5 * s, 0.5 * math.sqrt(3.0) * s]])
    v -= v.mean(axis=0)
    for _ in range(spec.depth):
        v = _refine(v, spec.beta)
    return Curve(v)


def circle_curve(radius: float, vertex_count: int) -> Curve:
    """Regular polygon inscribed in a circle centered at the origin."""
    if vertex_count < 8:
        raise DomainError("vertex_count must be >= 8")
    return ellipse_curve(radius, radius, vertex_count)


def ellipse_curve(a: float, b: float, vertex_count: int) -> Curve:
    """Ellipse sampled uniformly in the angle parameter."""
    if not (a > 0 and b > 0):
        raise DomainError("semi-axes must be positive")
    if vertex_count < 3:
        raise DomainError("vertex_count must be >= 3")
    t = 2.0 * np.pi * np.arange(vertex_count) / vertex_count
    return Curve(np.column_stack([a * np.cos(t), b * np.sin(t)]))


def rectangle_curve(width: float, height: float, center=(0.0, 0.0)) -> Curve:
    cx, cy = center
    w, h = 0.5 * width, 0.5 * height
    return Curve([[cx - w, cy - h], [cx + w, cy - h], [cx + w, cy + h], [cx - w, cy + h]])

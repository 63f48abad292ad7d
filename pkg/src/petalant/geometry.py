"""Planar geometry for the elliptical forwarding zone between two nodes.

The forwarding zone ("petal") between a source and a destination is an
ellipse whose major axis lies along the straight line connecting them.
Only nodes inside the petal take part in route discovery, so the zone
membership test is the heart of the broadcast-suppression scheme.

All coordinates are planar meters; there is no geodesy here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_WIDTH_RATIO = 0.5
DEFAULT_MARGIN = 1.0


class DegeneratePetal(ValueError):
    """Source and destination coincide, so no ellipse can be built.

    Callers should treat the destination as directly reachable (the
    one-hop case) instead of running a zone-restricted discovery.
    """


@dataclass(frozen=True, slots=True)
class Point:
    """A point in the plane, meters east (x) and north (y)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class PetalRegion:
    """An ellipse given by center, semi-axes and major-axis direction.

    `orientation` is the angle of the major axis from the +x axis in
    radians, normalized to (-pi, pi].
    """

    center: Point
    semi_major: float
    semi_minor: float
    orientation: float

    def __post_init__(self) -> None:
        if not (self.semi_major > 0 and self.semi_minor > 0):
            raise ValueError("semi-axes must be positive")
        if self.semi_minor > self.semi_major:
            raise ValueError("semi-minor axis exceeds semi-major axis")
        if not (-math.pi < self.orientation <= math.pi):
            raise ValueError("orientation must lie in (-pi, pi]")


def distance(p: Point, q: Point) -> float:
    """Euclidean distance between two points."""
    return math.hypot(q.x - p.x, q.y - p.y)


def midpoint(p: Point, q: Point) -> Point:
    return Point((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)


def build_petal(
    source: Point,
    dest: Point,
    width_ratio: float = DEFAULT_WIDTH_RATIO,
    margin: float = DEFAULT_MARGIN,
) -> PetalRegion:
    """Build the forwarding ellipse between `source` and `dest`.

    The ellipse is centered on the midpoint with its major axis along the
    source-destination line. The semi-major axis is half the separation
    plus `margin`, so both endpoints are strictly interior whenever
    margin > 0; the semi-minor axis is `width_ratio` times the semi-major
    axis. `width_ratio` trades flooding suppression against robustness.

    Raises DegeneratePetal when the endpoints coincide.
    """
    if not 0.0 < width_ratio <= 1.0:
        raise ValueError(f"width_ratio must be in (0, 1], got {width_ratio}")
    if margin < 0.0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    separation = distance(source, dest)
    if separation == 0.0:
        raise DegeneratePetal(f"coincident endpoints at ({source.x}, {source.y})")
    semi_major = separation / 2.0 + margin
    semi_minor = width_ratio * semi_major
    orientation = math.atan2(dest.y - source.y, dest.x - source.x)
    if orientation <= -math.pi:
        orientation = math.pi
    return PetalRegion(midpoint(source, dest), semi_major, semi_minor, orientation)


def petal_area(region: PetalRegion) -> float:
    """Area of the ellipse, pi * a * b, in square meters."""
    return math.pi * region.semi_major * region.semi_minor


def quadratic_form(region: PetalRegion, p: Point) -> float:
    """Evaluate (x'/a)^2 + (y'/b)^2 in the ellipse-local frame.

    The point is translated by -center and rotated by -orientation; the
    result is <= 1 exactly when the point lies in the closed ellipse.
    """
    dx = p.x - region.center.x
    dy = p.y - region.center.y
    cos_t = math.cos(region.orientation)
    sin_t = math.sin(region.orientation)
    local_x = dx * cos_t + dy * sin_t
    local_y = -dx * sin_t + dy * cos_t
    return (local_x / region.semi_major) ** 2 + (local_y / region.semi_minor) ** 2


def contains(region: PetalRegion, p: Point) -> bool:
    """True when `p` lies inside or on the boundary of the ellipse."""
    return quadratic_form(region, p) <= 1.0

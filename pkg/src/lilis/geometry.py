"""Exact 2-D geometry primitives shared by the whole engine.

All containment predicates are closed (boundary points count as inside),
which keeps results deterministic when partition cells share edges.
Degenerate rectangles and polygons (zero width, height, or area) are
legal inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Point",
    "Rect",
    "Polygon",
    "Circle",
    "rect_contains_point",
    "rect_intersects",
    "rect_envelops",
    "distance",
    "point_in_polygon",
    "points_in_polygon_mask",
    "polygon_mbr",
]


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} requires finite coordinates, got {v!r}")


@dataclass(frozen=True)
class Point:
    """A 2-D point with finite coordinates."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("Point", self.x, self.y)


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle (x_lo, y_lo) .. (x_hi, y_hi)."""

    x_lo: float
    y_lo: float
    x_hi: float
    y_hi: float

    def __post_init__(self):
        _require_finite("Rect", self.x_lo, self.y_lo, self.x_hi, self.y_hi)
        if self.x_lo > self.x_hi or self.y_lo > self.y_hi:
            raise ValueError(f"Rect corners are out of order: {self}")

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def height(self) -> float:
        return self.y_hi - self.y_lo

    @property
    def area(self) -> float:
        return self.width * self.height

    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass(frozen=True)
class Circle:
    """Circle given by center and radius >= 0."""

    center: Point
    radius: float

    def __post_init__(self):
        _require_finite("Circle", self.radius)
        if self.radius < 0:
            raise ValueError(f"Circle radius must be >= 0, got {self.radius}")

    def mbr(self) -> Rect:
        c, r = self.center, self.radius
        return Rect(c.x - r, c.y - r, c.x + r, c.y + r)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, implicitly closed (last vertex connects to the first).

    Containment uses even-odd ray casting; points exactly on an edge or
    vertex count as contained.
    """

    id: str
    vertices: tuple

    def __post_init__(self):
        verts = tuple(self.vertices)
        if len(verts) < 3:
            raise ValueError(f"Polygon {self.id!r} needs >= 3 vertices, got {len(verts)}")
        object.__setattr__(self, "vertices", verts)

    def vertex_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Vertex coordinates as a pair of float64 arrays."""
        vx = np.fromiter((v.x for v in self.vertices), dtype=np.float64, count=len(self.vertices))
        vy = np.fromiter((v.y for v in self.vertices), dtype=np.float64, count=len(self.vertices))
        return vx, vy


def rect_contains_point(r: Rect, p: Point) -> bool:
    """True iff p lies in the closed rectangle r (edges included)."""
    return r.x_lo <= p.x <= r.x_hi and r.y_lo <= p.y <= r.y_hi


def rect_intersects(a: Rect, b: Rect) -> bool:
    """True iff the closed rectangles share at least one point."""
    return a.x_lo <= b.x_hi and b.x_lo <= a.x_hi and a.y_lo <= b.y_hi and b.y_lo <= a.y_hi


def rect_envelops(outer: Rect, inner: Rect) -> bool:
    """True iff every point of inner lies within outer (closed semantics)."""
    return (
        outer.x_lo <= inner.x_lo
        and inner.x_hi <= outer.x_hi
        and outer.y_lo <= inner.y_lo
        and inner.y_hi <= outer.y_hi
    )


def distance(p: Point, q: Point) -> float:
    """Euclidean distance between two points."""
    return math.hypot(p.x - q.x, p.y - q.y)


def point_in_polygon(pg: Polygon, p: Point) -> bool:
    """Even-odd ray-casting containment; boundary points count as inside."""
    verts = pg.vertices
    n = len(verts)
    px, py = p.x, p.y
    inside = False
    ax, ay = verts[-1].x, verts[-1].y
    for v in verts:
        bx, by = v.x, v.y
        # boundary check: p collinear with the edge and within its bounding box
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if cross == 0.0 and min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by):
            return True
        # half-open rule in y avoids double-counting shared vertices
        if (ay > py) != (by > py):
            x_int = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_int:
                inside = not inside
        ax, ay = bx, by
    return inside


def points_in_polygon_mask(pg: Polygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized even-odd containment for many points at once.

    Same semantics as :func:`point_in_polygon` (boundary inclusive); used
    by the join refine step where candidate sets are large.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    vx, vy = pg.vertex_arrays()
    inside = np.zeros(xs.shape, dtype=bool)
    on_edge = np.zeros(xs.shape, dtype=bool)
    ax, ay = vx[-1], vy[-1]
    for bx, by in zip(vx, vy):
        cross = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
        lo_x, hi_x = (ax, bx) if ax <= bx else (bx, ax)
        lo_y, hi_y = (ay, by) if ay <= by else (by, ay)
        on_edge |= (cross == 0.0) & (xs >= lo_x) & (xs <= hi_x) & (ys >= lo_y) & (ys <= hi_y)
        toggles = (ay > ys) != (by > ys)
        if by != ay:
            x_int = ax + (ys - ay) * (bx - ax) / (by - ay)
            inside ^= toggles & (xs < x_int)
        ax, ay = bx, by
    return inside | on_edge


def polygon_mbr(pg: Polygon) -> Rect:
    """Minimal axis-aligned bounding rectangle over the vertices."""
    xs = [v.x for v in pg.vertices]
    ys = [v.y for v in pg.vertices]
    return Rect(min(xs), min(ys), max(xs), max(ys))

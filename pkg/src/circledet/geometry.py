"""Planar primitives and overlap metrics for circle-based detection.

Circles are the native detection shape; axis-aligned boxes and polygon
masks exist for comparison studies. All coordinates are continuous
pixels, origin at the top-left corner, x rightward, y downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Point2",
    "Circle",
    "Box",
    "PolygonMask",
    "ciou",
    "ciou_monte_carlo",
    "box_iou",
    "circle_to_tight_box",
    "rotate90",
    "polygon_area",
    "circle_nms",
]


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Point2:
    """A point in continuous image coordinates."""

    x: float
    y: float

    def __post_init__(self):
        _require_finite("Point2 coordinate", self.x, self.y)


@dataclass(frozen=True)
class Circle:
    """A scored circle detection: center, radius, confidence and class."""

    center: Point2
    radius: float
    score: float = 1.0
    category: int = 0

    def __post_init__(self):
        _require_finite("Circle radius", self.radius)
        if self.radius < 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")

    @property
    def area(self) -> float:
        return math.pi * self.radius * self.radius


@dataclass(frozen=True)
class Box:
    """An axis-aligned box: min corner plus nonnegative extents."""

    min_corner: Point2
    width: float
    height: float
    score: float = 1.0
    category: int = 0

    def __post_init__(self):
        _require_finite("Box extent", self.width, self.height)
        if self.width < 0 or self.height < 0:
            raise ValueError(
                f"box extents must be >= 0, got {self.width} x {self.height}"
            )
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point2:
        return Point2(self.min_corner.x + self.width / 2.0,
                      self.min_corner.y + self.height / 2.0)


Shape = Union[Circle, Box]


@dataclass(frozen=True)
class PolygonMask:
    """A simple (non-self-intersecting) polygon given as ordered vertices."""

    vertices: tuple[Point2, ...]

    def __post_init__(self):
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError(f"polygon needs >= 3 vertices, got {len(verts)}")
        xy = np.array([(p.x, p.y) for p in verts])
        if _polygon_self_intersects(xy):
            raise ValueError("polygon is self-intersecting")


def _polygon_self_intersects(xy: np.ndarray) -> bool:
    """True if any two non-adjacent edges intersect or touch.

    Vectorized orientation test over all edge pairs; adjacent edges (which
    legitimately share a vertex) are excluded. Zero-length edges count as
    degenerate and therefore intersecting.
    """
    n = len(xy)
    a = xy
    b = np.roll(xy, -1, axis=0)
    if np.any(np.all(a == b, axis=1)):
        return True  # repeated consecutive vertex

    i, j = np.triu_indices(n, k=1)
    adjacent = (j - i == 1) | ((i == 0) & (j == n - 1))
    i, j = i[~adjacent], j[~adjacent]
    if len(i) == 0:
        return False

    p1, p2 = a[i], b[i]
    q1, q2 = a[j], b[j]

    def cross(o, u, v):
        return (u[:, 0] - o[:, 0]) * (v[:, 1] - o[:, 1]) - \
               (u[:, 1] - o[:, 1]) * (v[:, 0] - o[:, 0])

    d1 = cross(p1, p2, q1)
    d2 = cross(p1, p2, q2)
    d3 = cross(q1, q2, p1)
    d4 = cross(q1, q2, p2)

    proper = (np.sign(d1) * np.sign(d2) < 0) & (np.sign(d3) * np.sign(d4) < 0)
    if np.any(proper):
        return True

    # Collinear touch: an endpoint of one edge lying on the other edge.
    def on_segment(o, e, p):
        within = (np.minimum(o, e) - 1e-12 <= p) & (p <= np.maximum(o, e) + 1e-12)
        return within.all(axis=1)

    touch = ((d1 == 0) & on_segment(p1, p2, q1)) | \
            ((d2 == 0) & on_segment(p1, p2, q2)) | \
            ((d3 == 0) & on_segment(q1, q2, p1)) | \
            ((d4 == 0) & on_segment(q1, q2, p2))
    return bool(np.any(touch))


def _circular_segment(r: float, t: float) -> float:
    """Area of the circular segment cut from a circle of radius r by a chord
    at signed center distance t (negative t selects the major segment)."""
    c = min(max(t / r, -1.0), 1.0)
    return r * r * math.acos(c) - t * math.sqrt(max(r * r - t * t, 0.0))


def ciou(a: Circle, b: Circle) -> float:
    """Intersection-over-union of two discs.

    Handles the three regimes explicitly: disjoint centers (0), one disc
    contained in the other ((r_min/r_max)^2), and partial overlap, where
    the intersection is a lens summed from two circular segments. Two
    zero-area discs have cIOU 0 by convention. Inputs are finite by
    construction of Circle and Point2.
    """
    # Canonical operand order makes the result bit-exactly symmetric.
    if (b.radius, b.center.x, b.center.y) < (a.radius, a.center.x, a.center.y):
        a, b = b, a
    ra, rb = a.radius, b.radius
    if ra == 0.0 and rb == 0.0:
        return 0.0
    d = math.hypot(b.center.x - a.center.x, b.center.y - a.center.y)
    if d >= ra + rb:
        return 0.0
    if d <= abs(ra - rb):
        rmin, rmax = min(ra, rb), max(ra, rb)
        return (rmin / rmax) ** 2
    # Partial overlap. Normalize by the larger radius so squared terms can
    # neither underflow nor overflow; the ratio is scale invariant.
    rmax = max(ra, rb)
    ra, rb, d = ra / rmax, rb / rmax, d / rmax
    # Signed chord distances from each center.
    ta = (ra * ra - rb * rb + d * d) / (2.0 * d)
    tb = d - ta
    inter = _circular_segment(ra, ta) + _circular_segment(rb, tb)
    union = math.pi * (ra * ra + rb * rb) - inter
    return min(max(inter / union, 0.0), 1.0)


def ciou_monte_carlo(a: Circle, b: Circle, samples: int,
                     seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of ciou with its standard error.

    Uniform samples are drawn over the joint bounding box; conditioned on
    landing in the union, a point lies in the intersection with probability
    exactly cIOU, so the estimate is the binomial hit ratio and the error
    follows from the binomial variance. Deterministic for a fixed seed.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if a.radius == 0.0 and b.radius == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    x_lo = min(a.center.x - a.radius, b.center.x - b.radius)
    x_hi = max(a.center.x + a.radius, b.center.x + b.radius)
    y_lo = min(a.center.y - a.radius, b.center.y - b.radius)
    y_hi = max(a.center.y + a.radius, b.center.y + b.radius)
    xs = rng.uniform(x_lo, x_hi, samples)
    ys = rng.uniform(y_lo, y_hi, samples)
    in_a = (xs - a.center.x) ** 2 + (ys - a.center.y) ** 2 <= a.radius ** 2
    in_b = (xs - b.center.x) ** 2 + (ys - b.center.y) ** 2 <= b.radius ** 2
    n_union = int(np.count_nonzero(in_a | in_b))
    if n_union == 0:
        return 0.0, math.inf
    n_inter = int(np.count_nonzero(in_a & in_b))
    p = n_inter / n_union
    return p, math.sqrt(p * (1.0 - p) / n_union)


def box_iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two axis-aligned boxes."""
    ix = min(a.min_corner.x + a.width, b.min_corner.x + b.width) - \
        max(a.min_corner.x, b.min_corner.x)
    iy = min(a.min_corner.y + a.height, b.min_corner.y + b.height) - \
        max(a.min_corner.y, b.min_corner.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def circle_to_tight_box(c: Circle) -> Box:
    """The square of side 2r centered on the circle."""
    return Box(
        Point2(c.center.x - c.radius, c.center.y - c.radius),
        2.0 * c.radius,
        2.0 * c.radius,
        score=c.score,
        category=c.category,
    )


def _rotate_point_ccw(p: Point2, image_w: float) -> Point2:
    # One counterclockwise quarter turn: (x, y) in WxH -> (y, W - x) in HxW.
    return Point2(p.y, image_w - p.x)


def rotate90(shape: Shape, image_w: float, image_h: float, turns: int) -> Shape:
    """Rotate a circle or box by quarter turns within an image.

    Each turn maps a point (x, y) of a WxH image to (y, W - x) of the
    rotated HxW image; circle radii are unchanged and box extents swap.
    """
    if turns not in (0, 1, 2, 3):
        raise ValueError(f"turns must be in {{0, 1, 2, 3}}, got {turns}")
    w, h = float(image_w), float(image_h)
    for _ in range(turns):
        if isinstance(shape, Circle):
            shape = Circle(_rotate_point_ccw(shape.center, w), shape.radius,
                           score=shape.score, category=shape.category)
        elif isinstance(shape, Box):
            far = Point2(shape.min_corner.x + shape.width,
                         shape.min_corner.y + shape.height)
            new_min = Point2(shape.min_corner.y, w - far.x)
            shape = Box(new_min, shape.height, shape.width,
                        score=shape.score, category=shape.category)
        else:
            raise TypeError(f"cannot rotate {type(shape).__name__}")
        w, h = h, w
    return shape


def polygon_area(m: PolygonMask) -> float:
    """Absolute shoelace area of a simple polygon."""
    xy = np.array([(p.x, p.y) for p in m.vertices])
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def circle_nms(dets: Sequence[Circle], threshold: float) -> list[Circle]:
    """Greedy suppression of overlapping circles.

    Circles are visited in descending score order (ties by smaller center
    x then y); a circle is kept only if its cIOU with every already-kept
    circle is below the threshold.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    ordered = sorted(dets, key=lambda c: (-c.score, c.center.x, c.center.y))
    kept: list[Circle] = []
    for cand in ordered:
        if all(ciou(cand, k) < threshold for k in kept):
            kept.append(cand)
    return kept

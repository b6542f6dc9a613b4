"""Planar polygon helpers: areas, containment, distances, enclosing shapes.

All coordinates are kilometres in a flat plane.
"""
from __future__ import annotations

import math
import random
from typing import Iterable, Sequence

import numpy as np

Point = tuple[float, float]

RECT_EPS = 1e-9


class GeometryError(ValueError):
    pass


def as_ring(polygon: Sequence[Sequence[float]]) -> np.ndarray:
    """Return polygon vertices as an (m, 2) float array without a closing duplicate."""
    ring = np.asarray(polygon, dtype=float)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise GeometryError(f"polygon must be a list of [x, y] pairs, got shape {ring.shape}")
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    if len(ring) < 3:
        raise GeometryError(f"polygon needs at least 3 vertices, got {len(ring)}")
    return ring


def shoelace_area(polygon) -> float:
    ring = as_ring(polygon)
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def perimeter(polygon) -> float:
    ring = as_ring(polygon)
    return float(np.linalg.norm(np.roll(ring, -1, axis=0) - ring, axis=1).sum())


def centroid(polygon) -> Point:
    ring = as_ring(polygon)
    x, y = ring[:, 0], ring[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-15:
        return float(x.mean()), float(y.mean())
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return float(cx), float(cy)


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15 and \
            min(a[1], b[1]) - 1e-15 <= c[1] <= max(a[1], b[1]) + 1e-15

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def is_simple(polygon) -> bool:
    """True when no two non-adjacent edges touch and the ring has positive area."""
    ring = as_ring(polygon)
    m = len(ring)
    if shoelace_area(ring) <= 0.0:
        return False
    edges = [(tuple(ring[i]), tuple(ring[(i + 1) % m])) for i in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            if j == i + 1 or (i == 0 and j == m - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def points_in_polygon(points, polygon) -> np.ndarray:
    """Even-odd containment test, vectorized over points."""
    ring = as_ring(polygon)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    px, py = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = ring[:, 0][None, :], ring[:, 1][None, :]
    x2, y2 = np.roll(ring[:, 0], -1)[None, :], np.roll(ring[:, 1], -1)[None, :]
    straddles = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    hits = straddles & (px < x_cross)
    return (hits.sum(axis=1) % 2) == 1


def bounding_box(polygon) -> tuple[float, float, float, float]:
    ring = as_ring(polygon)
    return float(ring[:, 0].min()), float(ring[:, 1].min()), float(ring[:, 0].max()), float(ring[:, 1].max())


def monte_carlo_area(polygon, samples: int = 50_000, seed: int = 0) -> float:
    """Hit-or-miss area estimate: inside fraction of bounding-box samples times box area."""
    if samples < 1:
        raise GeometryError("samples must be >= 1")
    xmin, ymin, xmax, ymax = bounding_box(polygon)
    box_area = (xmax - xmin) * (ymax - ymin)
    if box_area <= 0.0:
        raise GeometryError("degenerate polygon: zero-area bounding box")
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(xmin, xmax, samples), rng.uniform(ymin, ymax, samples)])
    inside = points_in_polygon(pts, polygon)
    return float(inside.mean() * box_area)


def segment_distances(point, polygon) -> np.ndarray:
    ring = as_ring(polygon)
    p = np.asarray(point, dtype=float)
    a = ring
    b = np.roll(ring, -1, axis=0)
    ab = b - a
    denom = (ab * ab).sum(axis=1)
    t = np.where(denom > 0, ((p - a) * ab).sum(axis=1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(proj - p, axis=1)


def point_polygon_distance(point, polygon) -> float:
    """Distance from a point to the closed polygon region (0 inside or on the boundary)."""
    d = float(segment_distances(point, polygon).min())
    if d == 0.0 or points_in_polygon([point], polygon)[0]:
        return 0.0
    return d


# -- minimum enclosing circle (Welzl, iterative form) ------------------------

def _circle_two(a, b):
    cx, cy = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    return cx, cy, max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1]))


def _circle_three(a, b, c):
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return x, y, r


def _inside(c, p) -> bool:
    return c is not None and math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1 + 1e-12) + 1e-12


def _cross(x0, y0, x1, y1, x2, y2) -> float:
    return (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)


def _mec_two(points, p, q):
    circ = _circle_two(p, q)
    left = right = None
    for r in points:
        if _inside(circ, r):
            continue
        cross = _cross(p[0], p[1], q[0], q[1], r[0], r[1])
        c = _circle_three(p, q, r)
        if c is None:
            continue
        side = _cross(p[0], p[1], q[0], q[1], c[0], c[1])
        if cross > 0.0 and (left is None or side > _cross(p[0], p[1], q[0], q[1], left[0], left[1])):
            left = c
        elif cross < 0.0 and (right is None or side < _cross(p[0], p[1], q[0], q[1], right[0], right[1])):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _mec_one(points, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _inside(c, q):
            c = _circle_two(p, q) if c[2] == 0.0 else _mec_two(points[: i + 1], p, q)
    return c


def minimum_enclosing_circle(points: Iterable[Sequence[float]], seed: int = 0) -> tuple[float, float, float]:
    """Smallest circle (cx, cy, r) containing every point; expected linear time."""
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise GeometryError("empty point set")
    pts = list(dict.fromkeys(pts))
    random.Random(seed).shuffle(pts)
    c = None
    for i, p in enumerate(pts):
        if c is None or not _inside(c, p):
            c = _mec_one(pts[: i + 1], p)
    return c


def reock_compactness(polygons: Sequence, areas: Sequence[float] | None = None) -> float:
    """Total area over the area of the smallest circle enclosing every vertex."""
    rings = [as_ring(p) for p in polygons]
    if not rings:
        raise GeometryError("no polygons given")
    total = float(sum(areas)) if areas is not None else sum(shoelace_area(r) for r in rings)
    _, _, r = minimum_enclosing_circle(np.vstack(rings))
    if r <= 0.0:
        raise GeometryError("degenerate polygon set")
    return min(1.0, total / (math.pi * r * r))


# -- convex hull and minimum-area rectangle ----------------------------------

def convex_hull(points) -> np.ndarray:
    """Monotone chain; counter-clockwise hull without repeated end point."""
    pts = sorted(set((float(x), float(y)) for x, y in np.asarray(points, dtype=float)))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(*out[-2], *out[-1], *p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def min_area_rectangle(points) -> tuple[float, float]:
    """(length, height) of the minimum-area enclosing rectangle, length >= height.

    Rotating calipers over the hull edges. Collinear or single-point input
    returns (diameter, RECT_EPS).
    """
    hull = convex_hull(points)
    if len(hull) < 3:
        if len(hull) == 2:
            return float(np.linalg.norm(hull[1] - hull[0])), RECT_EPS
        return RECT_EPS, RECT_EPS
    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.linalg.norm(edges, axis=1)
    keep = lengths > 0
    u = edges[keep] / lengths[keep][:, None]
    v = np.column_stack([-u[:, 1], u[:, 0]])
    pu = hull @ u.T
    pv = hull @ v.T
    w = pu.max(axis=0) - pu.min(axis=0)
    h = pv.max(axis=0) - pv.min(axis=0)
    best = int(np.argmin(w * h))
    a, b = float(w[best]), float(h[best])
    if min(a, b) <= 0.0:
        return max(a, b), RECT_EPS
    return max(a, b), min(a, b)

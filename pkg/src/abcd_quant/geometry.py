"""Planar geometry on pixel coordinates: convex hull, polygon area, Feret diameter."""

from __future__ import annotations

import math

import numpy as np


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list[tuple[float, float]]:
    """Andrew's monotone chain; returns hull vertices counter-clockwise.

    Collinear points are dropped. Fewer than three distinct points are
    returned as-is (sorted).
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return pts
    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def polygon_area(vertices) -> float:
    """Shoelace area of a simple polygon (absolute value)."""
    v = np.asarray(vertices, dtype=np.float64)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def max_feret(hull) -> float:
    """Largest pairwise distance on a CCW convex polygon by rotating calipers."""
    h = list(hull)
    n = len(h)
    if n < 2:
        return 0.0
    if n == 2:
        return math.dist(h[0], h[1])
    best = 0.0
    k = 1
    for i in range(n):
        j = (i + 1) % n
        # advance the antipodal vertex while it moves away from edge (i, j)
        while abs(_cross(h[i], h[j], h[(k + 1) % n])) > abs(_cross(h[i], h[j], h[k])):
            k = (k + 1) % n
        best = max(best, math.dist(h[i], h[k]), math.dist(h[j], h[k]))
    return best


def row_extremes(mask: np.ndarray) -> np.ndarray:
    """(x, y) of the leftmost and rightmost set pixel of every row.

    The convex hull of a pixel set equals the hull of these points, which
    keeps hull construction O(rows).
    """
    mask = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return np.empty((0, 2))
    sub = mask[rows]
    width = mask.shape[1]
    left = np.argmax(sub, axis=1)
    right = width - 1 - np.argmax(sub[:, ::-1], axis=1)
    xs = np.concatenate([left, right])
    ys = np.concatenate([rows, rows])
    return np.column_stack([xs, ys]).astype(np.float64)


def pixel_hull(mask: np.ndarray) -> list[tuple[float, float]]:
    """Convex hull of the centers of the set pixels."""
    return convex_hull(row_extremes(mask))


def pixel_outline_hull(mask: np.ndarray) -> list[tuple[float, float]]:
    """Convex hull of the set pixels taken as unit squares (corner points)."""
    centers = pixel_hull(mask)
    corners = [
        (x + ox, y + oy) for x, y in centers for ox in (-0.5, 0.5) for oy in (-0.5, 0.5)
    ]
    return convex_hull(corners)

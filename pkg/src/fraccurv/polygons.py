"""Simple-polygon utilities: membership, boundary distance, mapped regions."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, OutOfRangeError


def polygon_signed_area(verts: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise vertex order."""
    v = np.asarray(verts, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_is_simple(verts: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect (O(E^2) check)."""
    v = np.asarray(verts, dtype=float)
    n = len(v)
    edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        val = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(val) < 1e-15:
            return 0
        return 1 if val > 0 else -1

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15
                and min(a[1], b[1]) - 1e-15 <= c[1] <= max(a[1], b[1]) + 1e-15)

    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def points_in_polygon(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd crossing-number membership, vectorized over points.

    Boundary points resolve by the half-open edge rule (deterministic, not
    symmetric); callers needing strict interiors combine with a distance test.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(verts, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(v)
    for i in range(n):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % n]
        crosses = (y0 > y) != (y1 > y)
        if not np.any(crosses):
            continue
        xi = x0 + (y[crosses] - y0) * (x1 - x0) / (y1 - y0)
        hit = np.zeros_like(inside)
        hit[crosses] = xi > x[crosses]
        inside ^= hit
    return inside


def polygon_boundary_distance(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Unsigned Euclidean distance from points to the polygon boundary."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(verts, dtype=float)
    n = len(v)
    best = np.full(len(pts), np.inf)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        best = np.minimum(best, _point_segment_distance(pts, a, b))
    return best


def _point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


def signed_region_distance(point, region) -> float:
    """Signed distance to a region boundary: negative inside, positive outside.

    ``region`` is either an interval (a, b) on the line or a simple polygon
    given as an (n, 2) vertex array.
    """
    if isinstance(region, tuple) and len(region) == 2 and np.isscalar(region[0]):
        a, b = float(region[0]), float(region[1])
        x = float(np.asarray(point).reshape(-1)[0])
        if a <= x <= b:
            return -min(x - a, b - x)
        return a - x if x < a else x - b
    verts = np.asarray(region, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
        raise InvalidInputError("region must be an interval or an (n,2) polygon")
    if not polygon_is_simple(verts):
        raise InvalidInputError("polygon is self-intersecting")
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    d = polygon_boundary_distance(pts, verts)
    inside = points_in_polygon(pts, verts)
    signed = np.where(inside, -d, d)
    return float(signed[0]) if signed.size == 1 else signed


def map_region(mapping, open_set):
    """Image of an OpenSet under a Similarity, as interval tuple or CCW vertex array."""
    if open_set.interval is not None:
        a, b = open_set.interval
        ends = np.sort(mapping.apply(np.asarray([[a], [b]]))[:, 0])
        return (float(ends[0]), float(ends[1]))
    verts = mapping.apply(np.asarray(open_set.polygon, dtype=float))
    if polygon_signed_area(verts) < 0.0:  # reflections flip orientation
        verts = verts[::-1]
    return verts


def open_set_union(ifs, r: float, R: float | None = None) -> list:
    """Images {S_sigma(O)} over the stopping words at scale r (pairwise disjoint)."""
    if ifs.open_set is None:
        raise InvalidInputError("IFS has no open set attached")
    R_val = ifs.R if R is None else float(R)
    if not (0.0 < r <= R_val):
        raise OutOfRangeError(f"r must lie in (0, R={R_val}], got {r}")
    regions = []
    for word in ifs.stopping_set(r, R=R_val):
        A, t = ifs.word_affine(word)
        regions.append(_map_region_affine(A, t, ifs.open_set))
    return regions


def _map_region_affine(A: np.ndarray, t: np.ndarray, open_set):
    if open_set.interval is not None:
        a, b = open_set.interval
        ends = np.sort(A[0, 0] * np.asarray([a, b]) + t[0])
        return (float(ends[0]), float(ends[1]))
    verts = np.asarray(open_set.polygon, dtype=float) @ A.T + t
    if polygon_signed_area(verts) < 0.0:
        verts = verts[::-1]
    return verts


def distance_to_region_complement(points: np.ndarray, regions: list) -> np.ndarray:
    """Distance from points to the complement of a union of disjoint open regions.

    Zero outside the union; inside, the distance to the boundary of the
    containing region (regions are pairwise disjoint so at most one contains
    a given point).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts))
    for region in regions:
        if isinstance(region, tuple):
            a, b = region
            x = pts[:, 0]
            mask = (x > a) & (x < b)
            out[mask] = np.maximum(out[mask], np.minimum(x[mask] - a, b - x[mask]))
        else:
            verts = np.asarray(region, dtype=float)
            mask = points_in_polygon(pts, verts)
            if np.any(mask):
                d = polygon_boundary_distance(pts[mask], verts)
                out[mask] = np.maximum(out[mask], d)
    return out

"""Planar computational-geometry kernel for building footprints.

All coordinates are projected meters. Polygons are stored as open rings
(no duplicate closing vertex) with the exterior counter-clockwise and
holes clockwise.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np
import shapely.geometry as sgeom

from .errors import DegenerateGeometryError

_COLLINEAR_EPS = 1e-12


def ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area of an open ring (positive when CCW).

    Computed about the first vertex so projected coordinates with large
    offsets (UTM-scale) do not lose precision to cancellation.
    """
    local = ring - ring[0]
    x = local[:, 0]
    y = local[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def ring_length(ring: np.ndarray) -> float:
    d = np.roll(ring, -1, axis=0) - ring
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _ring_centroid_weighted(ring: np.ndarray, origin: np.ndarray) -> tuple[float, float]:
    """Area-weighted centroid contribution (Cx*A, Cy*A) of one ring,
    taken about a local origin for numerical stability."""
    local = ring - origin
    x = local[:, 0]
    y = local[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    cross = x * yn - xn * y
    cx = float(((x + xn) * cross).sum()) / 6.0
    cy = float(((y + yn) * cross).sum()) / 6.0
    return cx, cy


def _normalize_ring(ring, ccw: bool) -> np.ndarray:
    arr = np.asarray(ring, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DegenerateGeometryError("ring must be an (n, 2) point sequence")
    # closure test is absolute: relative tolerances misfire on projected
    # coordinates with large offsets
    if len(arr) >= 2 and np.abs(arr[0] - arr[-1]).max() < 1e-9:
        arr = arr[:-1]
    if len(arr) < 3:
        raise DegenerateGeometryError("ring needs at least 3 distinct vertices")
    signed = ring_signed_area(arr)
    if abs(signed) < _COLLINEAR_EPS:
        raise DegenerateGeometryError("ring has zero area")
    if ccw != (signed > 0):
        arr = arr[::-1].copy()
    return arr


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with optional holes.

    The exterior ring is normalized counter-clockwise and holes clockwise;
    closing vertices are stripped. Self-intersection is not checked here
    (ingest rejects invalid footprints, see :mod:`urbanform.geoio`).
    """

    exterior: np.ndarray
    holes: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __init__(self, exterior, holes=()):
        object.__setattr__(self, "exterior", _normalize_ring(exterior, ccw=True))
        object.__setattr__(
            self, "holes", tuple(_normalize_ring(h, ccw=False) for h in holes)
        )

    @property
    def area(self) -> float:
        a = ring_signed_area(self.exterior)
        for h in self.holes:
            a += ring_signed_area(h)  # holes are CW, negative contribution
        return a

    @property
    def perimeter(self) -> float:
        """Length of the outer ring only; holes do not contribute."""
        return ring_length(self.exterior)

    @property
    def centroid(self) -> np.ndarray:
        origin = self.exterior[0]
        cx = cy = 0.0
        for ring in (self.exterior, *self.holes):
            wx, wy = _ring_centroid_weighted(ring, origin)
            cx += wx
            cy += wy
        a = self.area
        return np.array([origin[0] + cx / a, origin[1] + cy / a])

    def vertex_radii(self) -> np.ndarray:
        """Distances from the exterior vertices to the centroid."""
        d = self.exterior - self.centroid
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def all_rings(self) -> tuple[np.ndarray, ...]:
        return (self.exterior, *self.holes)

    def to_shapely(self) -> sgeom.Polygon:
        return sgeom.Polygon(self.exterior, [h for h in self.holes])

    def translated(self, dx: float, dy: float) -> "Polygon":
        off = np.array([dx, dy])
        return Polygon(self.exterior + off, [h + off for h in self.holes])

    def rotated(self, angle_deg: float, origin=(0.0, 0.0)) -> "Polygon":
        t = math.radians(angle_deg)
        rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        o = np.asarray(origin, dtype=float)
        return Polygon(
            (self.exterior - o) @ rot.T + o,
            [(h - o) @ rot.T + o for h in self.holes],
        )

    def scaled(self, s: float, origin=(0.0, 0.0)) -> "Polygon":
        o = np.asarray(origin, dtype=float)
        return Polygon(
            (self.exterior - o) * s + o, [(h - o) * s + o for h in self.holes]
        )


def polygon_basics(p: Polygon):
    """Area, outer perimeter, area-weighted centroid, and vertex radii."""
    a = p.area
    if a <= 0:
        raise DegenerateGeometryError("polygon has non-positive area")
    return a, p.perimeter, p.centroid, p.vertex_radii()


def convex_hull_points(points: np.ndarray) -> np.ndarray:
    """Convex hull of a point set by monotone chain, CCW, no repeats.

    Collinear points are dropped, so every returned vertex is extreme.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        raise DegenerateGeometryError("hull needs at least 3 distinct points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for q in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list[np.ndarray] = []
    for q in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise DegenerateGeometryError("all points are collinear")
    return hull


def convex_hull(p: Polygon) -> Polygon:
    return Polygon(convex_hull_points(p.exterior))


def min_bounding_rect(p: Polygon) -> tuple[float, float, float]:
    """Minimum-area bounding rectangle by rotating calipers.

    Returns (length, width, orientation) with length >= width and the
    long-axis direction folded into [0, 90) degrees.
    """
    hull = convex_hull_points(p.exterior)
    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.arctan2(edges[:, 1], edges[:, 0])
    best = None
    for phi in angles:
        c, s = math.cos(-phi), math.sin(-phi)
        rot = np.array([[c, -s], [s, c]])
        proj = hull @ rot.T
        w = proj[:, 0].max() - proj[:, 0].min()
        h = proj[:, 1].max() - proj[:, 1].min()
        area = w * h
        if best is None or area < best[0]:
            best = (area, w, h, phi)
    _, w, h, phi = best
    if w >= h:
        length, width = w, h
        long_axis = math.degrees(phi)
    else:
        length, width = h, w
        long_axis = math.degrees(phi) + 90.0
    return length, width, fold_angle(long_axis, 90.0)


def longest_chord(p: Polygon) -> tuple[float, float, float]:
    """Hull diameter, its orientation in [0, 180), and the hull extent
    perpendicular to it.

    Ties between equally long chords are broken toward the smaller folded
    angle.
    """
    hull = convex_hull_points(p.exterior)
    diff = hull[:, None, :] - hull[None, :, :]
    dist2 = (diff**2).sum(axis=2)
    dmax2 = dist2.max()
    if dmax2 <= 0:
        raise DegenerateGeometryError("degenerate hull")
    ii, jj = np.where(dist2 >= dmax2 * (1.0 - 1e-12))
    best_angle = None
    best_pair = None
    for i, j in zip(ii, jj):
        if i >= j:
            continue
        v = hull[j] - hull[i]
        ang = fold_angle(math.degrees(math.atan2(v[1], v[0])), 180.0)
        if best_angle is None or ang < best_angle - 1e-9:
            best_angle = ang
            best_pair = (i, j)
    i, j = best_pair
    chord = hull[j] - hull[i]
    length = float(np.hypot(*chord))
    perp = np.array([-chord[1], chord[0]]) / length
    proj = hull @ perp
    width = float(proj.max() - proj.min())
    return length, best_angle, width


def _circle_from(points: list[np.ndarray]):
    if not points:
        return np.zeros(2), 0.0
    if len(points) == 1:
        return points[0].copy(), 0.0
    if len(points) == 2:
        center = (points[0] + points[1]) / 2.0
        return center, float(np.hypot(*(points[0] - center)))
    # work about the local midpoint: circumcenters cancel badly otherwise
    origin = (points[0] + points[1] + points[2]) / 3.0
    points = [q - origin for q in points]
    (ax, ay), (bx, by), (cx, cy) = points
    scale = max(1.0, max(abs(v) for q in points for v in q))
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-12 * scale * scale:
        # collinear triple, fall back to the widest pair
        pairs = [(points[0], points[1]), (points[0], points[2]), (points[1], points[2])]
        center, r = max(
            (((p + q) / 2.0, float(np.hypot(*(p - q)) / 2.0)) for p, q in pairs),
            key=lambda cr: cr[1],
        )
        return center + origin, r
    ux = (
        (ax**2 + ay**2) * (by - cy)
        + (bx**2 + by**2) * (cy - ay)
        + (cx**2 + cy**2) * (ay - by)
    ) / d
    uy = (
        (ax**2 + ay**2) * (cx - bx)
        + (bx**2 + by**2) * (ax - cx)
        + (cx**2 + cy**2) * (bx - ax)
    ) / d
    center = np.array([ux, uy])
    r = max(float(np.hypot(*(q - center))) for q in points)
    return center + origin, r


def smallest_enclosing_circle(points) -> tuple[np.ndarray, float]:
    """Smallest circle containing all points (Welzl, expected linear).

    The recursion is unrolled into the classic incremental form; input
    order is shuffled with a fixed seed so results are reproducible.
    """
    pts = [np.asarray(q, dtype=float) for q in np.atleast_2d(np.asarray(points, float))]
    if not pts:
        raise DegenerateGeometryError("no points")
    rng = random.Random(0x5EED)
    rng.shuffle(pts)

    def contains(center, r, q):
        return np.hypot(*(q - center)) <= r * (1.0 + 1e-12) + 1e-12

    center, r = pts[0].copy(), 0.0
    for i, q in enumerate(pts[1:], start=1):
        if contains(center, r, q):
            continue
        # q is on the boundary of the circle over pts[:i+1]
        center, r = q.copy(), 0.0
        for j, u in enumerate(pts[:i]):
            if contains(center, r, u):
                continue
            center, r = _circle_from([q, u])
            for v in pts[:j]:
                if contains(center, r, v):
                    continue
                center, r = _circle_from([q, u, v])
    return center, r


def boundary_radii(p: Polygon) -> tuple[float, float]:
    """(r_max, r_min): extreme distances from the centroid to the polygon
    boundary, including perpendicular feet on edges and hole rings.

    Raises when the centroid lies outside the polygon (callers fall back
    to vertex radii).
    """
    c = p.centroid
    if not p.to_shapely().covers(sgeom.Point(c)):
        raise DegenerateGeometryError("centroid outside polygon")
    r_max = 0.0
    r_min = math.inf
    for ring in p.all_rings:
        d = ring - c
        r_max = max(r_max, float(np.hypot(d[:, 0], d[:, 1]).max()))
        nxt = np.roll(ring, -1, axis=0)
        seg = nxt - ring
        seg_len2 = (seg**2).sum(axis=1)
        t = np.clip(((c - ring) * seg).sum(axis=1) / np.maximum(seg_len2, 1e-300), 0, 1)
        foot = ring + t[:, None] * seg
        fd = foot - c
        r_min = min(r_min, float(np.hypot(fd[:, 0], fd[:, 1]).min()))
    return r_max, r_min


def ray_radii(p: Polygon, n_rays: int = 16) -> np.ndarray:
    """First-crossing distances from the centroid along n equally spaced
    rays (starting at 0 degrees). Crossings are taken against all rings.

    Raises when the centroid lies outside the polygon.
    """
    c = p.centroid
    if not p.to_shapely().covers(sgeom.Point(c)):
        raise DegenerateGeometryError("centroid outside polygon")
    radii = np.empty(n_rays)
    for k in range(n_rays):
        theta = 2.0 * math.pi * k / n_rays
        u = np.array([math.cos(theta), math.sin(theta)])
        t_hit = math.inf
        for ring in p.all_rings:
            a = ring
            b = np.roll(ring, -1, axis=0)
            # solve c + t*u = a + s*(b-a)
            e = b - a
            denom = u[0] * (-e[:, 1]) - u[1] * (-e[:, 0])
            ok = np.abs(denom) > 1e-300
            rhs = a - c
            t = np.where(ok, (rhs[:, 0] * (-e[:, 1]) - rhs[:, 1] * (-e[:, 0])) / np.where(ok, denom, 1.0), np.inf)
            s = np.where(ok, (u[0] * rhs[:, 1] - u[1] * rhs[:, 0]) / np.where(ok, denom, 1.0), np.inf)
            valid = ok & (t > 1e-12) & (s >= -1e-12) & (s <= 1 + 1e-12)
            if valid.any():
                t_hit = min(t_hit, float(t[valid].min()))
        if not math.isfinite(t_hit):
            raise DegenerateGeometryError("ray does not cross the boundary")
        radii[k] = t_hit
    return radii


def densify_ring(ring: np.ndarray, spacing: float) -> np.ndarray:
    """Resample an open ring so consecutive points are at most `spacing`
    apart. Original vertices are kept."""
    out = []
    nxt = np.roll(ring, -1, axis=0)
    for a, b in zip(ring, nxt):
        out.append(a)
        length = float(np.hypot(*(b - a)))
        extra = int(math.ceil(length / spacing)) - 1
        if extra > 0:
            ts = np.arange(1, extra + 1) / (extra + 1)
            out.extend(a + t * (b - a) for t in ts)
    return np.array(out)


def fold_angle(angle_deg: float, period: float) -> float:
    """Fold an angle into [0, period), snapping values within 1e-9 of the
    upper boundary back to 0 so exact orientations survive float noise."""
    folded = angle_deg % period
    if period - folded < 1e-9:
        return 0.0
    return folded

"""
Planar geometry primitives and Delaunay triangulation.

The triangulation is the incremental Bowyer-Watson algorithm with an
enclosing super-triangle that is removed after all sites are inserted.
Output is deterministic for a fixed input ordering; exactly cocircular
point sets are resolved by insertion order (the strict in-circumcircle
test keeps the earlier-created triangles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Triangles with |signed area| below this are treated as collinear.
DEGENERATE_AREA = 1e-12
# Input sites closer than this are merged before triangulation.
DUPLICATE_SITE_TOL = 1e-9


class CollinearError(ValueError):
    """The three points are (numerically) collinear."""


class TriangulationError(ValueError):
    """Triangulation cannot be computed for the given sites."""


class TooFewSitesError(TriangulationError):
    """Fewer than 3 distinct sites."""


class AllCollinearError(TriangulationError):
    """All sites lie on a single line."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point2 coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError("Pose2 fields must be finite")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)


@dataclass
class Triangulation:
    """Delaunay triangulation of a set of 2D sites.

    Attributes
    ----------
    sites
        Deduplicated input points; triangle/face indices refer to this list.
    triangles
        Sorted index triplets, one per triangular cell.
    faces
        Sorted index pairs (triangle edges).
    face_triangles
        Face -> indices into `triangles` of the 1 (hull) or 2 (interior)
        cells it belongs to.
    """

    sites: list[Point2]
    triangles: list[tuple[int, int, int]]
    faces: list[tuple[int, int]] = field(default_factory=list)
    face_triangles: dict[tuple[int, int], list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.faces:
            self._build_faces()

    def _build_faces(self):
        face_map: dict[tuple[int, int], list[int]] = {}
        for t_idx, (i, j, k) in enumerate(self.triangles):
            for a, b in ((i, j), (j, k), (i, k)):
                face = (a, b) if a < b else (b, a)
                face_map.setdefault(face, []).append(t_idx)
        self.faces = sorted(face_map)
        self.face_triangles = face_map

    def hull_faces(self) -> list[tuple[int, int]]:
        """Faces belonging to exactly one triangle (the convex hull)."""
        return [f for f in self.faces if len(self.face_triangles[f]) == 1]


def circumcircle(a: Point2, b: Point2, c: Point2) -> tuple[Point2, float]:
    """Circumcircle of the triangle (a, b, c).

    Returns the center and radius. Raises CollinearError when the triangle
    is degenerate (|signed area| < DEGENERATE_AREA).
    """
    ax, ay = a.x, a.y
    bx, by = b.x, b.y
    cx, cy = c.x, c.y
    # 2 * signed area
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 2.0 * DEGENERATE_AREA:
        raise CollinearError(f"points {a}, {b}, {c} are collinear")
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    center = Point2(ux, uy)
    return center, center.distance_to(a)


def _dedupe_sites(sites: list[Point2], tol: float) -> list[Point2]:
    kept: list[Point2] = []
    for p in sites:
        if not any(p.distance_to(q) <= tol for q in kept):
            kept.append(p)
    return kept


def delaunay_triangulate(sites: list[Point2]) -> Triangulation:
    """Delaunay triangulation via incremental Bowyer-Watson.

    Sites closer than DUPLICATE_SITE_TOL are merged first. Raises
    TooFewSitesError for < 3 distinct sites and AllCollinearError when all
    sites lie on a line (no triangle survives).
    """
    pts = _dedupe_sites(sites, DUPLICATE_SITE_TOL)
    n = len(pts)
    if n < 3:
        raise TooFewSitesError(f"need at least 3 distinct sites, got {n}")

    coords = np.array([[p.x, p.y] for p in pts])
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = max(float(np.max(hi - lo)), 1.0)
    cx, cy = (lo + hi) / 2.0

    # Super-triangle comfortably enclosing every site.
    m = 20.0 * span
    super_pts = np.array(
        [[cx - m, cy - m], [cx + m, cy - m], [cx, cy + m]]
    )
    all_pts = np.vstack([coords, super_pts])
    s0, s1, s2 = n, n + 1, n + 2

    # Per-triangle cached circumcenter and squared radius, kept in growable
    # arrays with a liveness mask so indices stay stable across removals.
    tri_verts: list[tuple[int, int, int]] = [(s0, s1, s2)]
    alive: list[bool] = [True]
    cap = 16
    center_arr = np.empty((cap, 2))
    radius_arr = np.empty(cap)
    n_tris = 0

    def _circum(i: int, j: int, k: int) -> tuple[float, float, float]:
        ax, ay = all_pts[i]
        bx, by = all_pts[j]
        kx, ky = all_pts[k]
        d = 2.0 * (ax * (by - ky) + bx * (ky - ay) + kx * (ay - by))
        a2 = ax * ax + ay * ay
        b2 = bx * bx + by * by
        c2 = kx * kx + ky * ky
        ux = (a2 * (by - ky) + b2 * (ky - ay) + c2 * (ay - by)) / d
        uy = (a2 * (kx - bx) + b2 * (ax - kx) + c2 * (bx - ax)) / d
        r2 = (ax - ux) ** 2 + (ay - uy) ** 2
        return ux, uy, r2

    def _push_circum(i: int, j: int, k: int):
        nonlocal cap, center_arr, radius_arr, n_tris
        if n_tris >= cap:
            cap *= 2
            ca = np.empty((cap, 2))
            ra = np.empty(cap)
            ca[:n_tris] = center_arr[:n_tris]
            ra[:n_tris] = radius_arr[:n_tris]
            center_arr, radius_arr = ca, ra
        ux, uy, r2 = _circum(i, j, k)
        center_arr[n_tris] = (ux, uy)
        radius_arr[n_tris] = r2
        n_tris += 1

    _push_circum(s0, s1, s2)

    for p_idx in range(n):
        px, py = all_pts[p_idx]
        # Strictly-inside circumcircle test, vectorized over all triangles.
        dx = center_arr[:n_tris, 0] - px
        dy = center_arr[:n_tris, 1] - py
        inside = (dx * dx + dy * dy) < radius_arr[:n_tris]
        bad = [int(t) for t in np.flatnonzero(inside) if alive[t]]
        if not bad:
            # Cannot happen for a point inside the super-triangle; guards
            # against pathological float behaviour.
            continue

        # Cavity boundary: edges appearing exactly once among bad triangles.
        edge_count: dict[tuple[int, int], tuple[int, int]] = {}
        for t in bad:
            i, j, k = tri_verts[t]
            for a, b in ((i, j), (j, k), (k, i)):
                key = (a, b) if a < b else (b, a)
                if key in edge_count:
                    del edge_count[key]
                else:
                    edge_count[key] = (a, b)
            alive[t] = False

        for a, b in edge_count.values():
            tri_verts.append((a, b, p_idx))
            alive.append(True)
            _push_circum(a, b, p_idx)

    final = [
        tuple(sorted(tri_verts[t]))
        for t in range(n_tris)
        if alive[t] and all(v < n for v in tri_verts[t])
    ]
    if not final:
        raise AllCollinearError("all sites are collinear")
    final.sort()
    return Triangulation(sites=pts, triangles=final)


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(px, py, qx, qy, rx, ry) -> bool:
    # r is collinear with p-q; check it lies within the bounding box.
    return min(px, qx) <= rx <= max(px, qx) and min(py, qy) <= ry <= max(py, qy)


def segment_intersects_segment(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool:
    """True iff the closed segments p1-p2 and q1-q2 share at least one point."""
    o1 = _orient(p1.x, p1.y, p2.x, p2.y, q1.x, q1.y)
    o2 = _orient(p1.x, p1.y, p2.x, p2.y, q2.x, q2.y)
    o3 = _orient(q1.x, q1.y, q2.x, q2.y, p1.x, p1.y)
    o4 = _orient(q1.x, q1.y, q2.x, q2.y, p2.x, p2.y)

    if ((o1 > 0) != (o2 > 0) and (o1 < 0) != (o2 < 0)
            and (o3 > 0) != (o4 > 0) and (o3 < 0) != (o4 < 0)):
        return True
    if o1 == 0 and _on_segment(p1.x, p1.y, p2.x, p2.y, q1.x, q1.y):
        return True
    if o2 == 0 and _on_segment(p1.x, p1.y, p2.x, p2.y, q2.x, q2.y):
        return True
    if o3 == 0 and _on_segment(q1.x, q1.y, q2.x, q2.y, p1.x, p1.y):
        return True
    if o4 == 0 and _on_segment(q1.x, q1.y, q2.x, q2.y, p2.x, p2.y):
        return True
    return False


def segment_strictly_crosses(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool:
    """True iff the open interiors of the segments cross.

    Touching at an endpoint or collinear overlap does not count. Used for
    start/goal visibility, where sharing a vertex must not block the view.
    """
    o1 = _orient(p1.x, p1.y, p2.x, p2.y, q1.x, q1.y)
    o2 = _orient(p1.x, p1.y, p2.x, p2.y, q2.x, q2.y)
    o3 = _orient(q1.x, q1.y, q2.x, q2.y, p1.x, p1.y)
    o4 = _orient(q1.x, q1.y, q2.x, q2.y, p2.x, p2.y)
    return ((o1 > 0) != (o2 > 0) and (o1 < 0) != (o2 < 0)
            and (o3 > 0) != (o4 > 0) and (o3 < 0) != (o4 < 0))


def point_segment_distance(px: float, py: float, ax: float, ay: float,
                           bx: float, by: float) -> float:
    """Distance from point (px, py) to the closed segment a-b."""
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * abx + (py - ay) * aby) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * abx), py - (ay + t * aby))


def segment_intersects_circle(p1: Point2, p2: Point2, center: Point2, radius: float) -> bool:
    """True iff the minimum distance from the segment to the center is < radius."""
    return point_segment_distance(center.x, center.y, p1.x, p1.y, p2.x, p2.y) < radius

"""
Probabilistic navigation graph over Delaunay cell faces.

Each face of the Delaunay triangulation of the estimated obstacle centers
is a potential passage between two obstacles. Faces receive graph vertices
according to their safe-passage probability and range zone:

  * safe faces (p >= p_target) always get vertices; very wide safe faces
    get several, so the graph better approximates geometric path length;
  * unsafe faces in the long range zone get a single midpoint vertex,
    keeping uncertain but potentially viable passages available to the
    hypothesis planner;
  * unsafe faces in the short range zone get none: there is no time left
    to improve those estimates, so the robot must not plan through them.

Vertices within one triangular cell are fully connected across faces, with
Euclidean edge costs. The start and goal attach to the faces of their
containing cell, or to visible hull-face vertices when outside.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .estimation import LandmarkEstimate
from .geometry import (
    Point2,
    TriangulationError,
    delaunay_triangulate,
    segment_strictly_crosses,
)
from .safety import CoincidentObstaclesError, safe_passage_probability_2d


class RangeZone(enum.Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class NavVertex:
    id: int
    position: Point2
    p_safe: float
    c_safe: float
    zone: RangeZone
    face: tuple[int, int] | None  # None marks the start/goal vertices


@dataclass(frozen=True)
class GraphParams:
    p_target: float = 0.95
    r_short: float = 7.5
    robot_width: float = 0.5
    max_graph_range: float = 15.0
    wide_face_p: float = 0.999
    wide_face_gap_factor: float = 3.0
    max_face_vertices: int = 5

    def __post_init__(self):
        if not 0.0 <= self.p_target < 1.0:
            raise ValueError(f"p_target must be in [0, 1), got {self.p_target}")
        if self.r_short > self.max_graph_range:
            raise ValueError("r_short must not exceed max_graph_range")


@dataclass
class NavGraph:
    vertices: list[NavVertex]
    edges: list[tuple[int, int, float]]
    start_id: int
    goal_id: int
    adjacency: dict[int, list[tuple[int, float]]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.adjacency:
            adj: dict[int, list[tuple[int, float]]] = {v.id: [] for v in self.vertices}
            for u, v, c in self.edges:
                adj[u].append((v, c))
                adj[v].append((u, c))
            self.adjacency = adj

    def vertex(self, vid: int) -> NavVertex:
        return self.vertices[vid]


def classify_zone(estimate: LandmarkEstimate, robot: Point2, r_short: float) -> RangeZone:
    """Short iff the estimate mean is within r_short of the robot (inclusive)."""
    d = math.hypot(estimate.position_mean[0] - robot.x,
                   estimate.position_mean[1] - robot.y)
    return RangeZone.SHORT if d <= r_short else RangeZone.LONG


def filter_estimates_for_graph(estimates: list[LandmarkEstimate], robot: Point2,
                               max_graph_range: float,
                               min_updates: int = 2) -> list[LandmarkEstimate]:
    """Estimates usable for graph construction.

    Drops estimates beyond the graph range (near the sensor's maximum range
    they carry a single detection and far too much uncertainty) and those
    with fewer than `min_updates` associated detections.
    """
    out = []
    for est in estimates:
        if est.num_updates < min_updates:
            continue
        d = math.hypot(est.position_mean[0] - robot.x, est.position_mean[1] - robot.y)
        if d <= max_graph_range:
            out.append(est)
    return out


def _face_vertex_positions(est_i: LandmarkEstimate, est_j: LandmarkEstimate,
                           p: float, params: GraphParams) -> list[tuple[float, float]]:
    """Vertex positions on a safe face (p >= p_target).

    The default is the single midpoint of the gap, equally offset from both
    obstacle mean edges. Very safe, very wide faces get several vertices
    spread along the gap so long detours around one obstacle or the other
    are priced correctly.
    """
    pi = est_i.position_mean
    pj = est_j.position_mean
    delta = pj - pi
    dist = float(np.hypot(*delta))
    u = delta / dist
    r_i = est_i.diameter_mean / 2.0
    r_j = est_j.diameter_mean / 2.0
    edge_i = pi + u * min(r_i, dist / 2.0)
    edge_j = pj - u * min(r_j, dist / 2.0)
    gap = dist - r_i - r_j
    mid = 0.5 * (edge_i + edge_j)

    if p >= params.wide_face_p and gap > params.wide_face_gap_factor * params.robot_width:
        a = edge_i + u * (params.robot_width / 2.0)
        b = edge_j - u * (params.robot_width / 2.0)
        span = float(np.hypot(*(b - a)))
        if span > params.robot_width:
            n = min(params.max_face_vertices,
                    int(math.ceil(span / params.robot_width)) + 1)
            ts = np.linspace(0.0, 1.0, n)
            return [tuple(a + t * (b - a)) for t in ts]
    return [tuple(mid)]


def _point_in_triangle(px, py, a, b, c, tol=1e-12) -> bool:
    def cross(ox, oy, ax, ay, bx, by):
        return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)

    d1 = cross(a[0], a[1], b[0], b[1], px, py)
    d2 = cross(b[0], b[1], c[0], c[1], px, py)
    d3 = cross(c[0], c[1], a[0], a[1], px, py)
    has_neg = (d1 < -tol) or (d2 < -tol) or (d3 < -tol)
    has_pos = (d1 > tol) or (d2 > tol) or (d3 > tol)
    return not (has_neg and has_pos)


def _degenerate_graph(start: Point2, goal: Point2) -> NavGraph:
    vs = NavVertex(0, start, 1.0, 0.0, RangeZone.SHORT, None)
    vg = NavVertex(1, goal, 1.0, 0.0, RangeZone.SHORT, None)
    return NavGraph([vs, vg], [(0, 1, start.distance_to(goal))], 0, 1)


def build_navigation_graph(estimates: list[LandmarkEstimate], start: Point2,
                           goal: Point2, params: GraphParams) -> NavGraph:
    """Build the navigation graph over the Delaunay faces of the estimates.

    The caller passes estimates already filtered for range/maturity (see
    filter_estimates_for_graph) plus any a-priori boundary obstacles. With
    fewer than 3 usable estimates (or a collinear world) the graph
    degenerates to a direct start-goal connection.
    """
    # Estimates whose means coincide cannot both appear as Delaunay sites.
    usable: list[LandmarkEstimate] = []
    for est in estimates:
        if not any(np.hypot(*(est.position_mean - v.position_mean)) <= 1e-9
                   for v in usable):
            usable.append(est)

    if len(usable) < 3:
        return _degenerate_graph(start, goal)
    try:
        tri = delaunay_triangulate([Point2(*e.position_mean) for e in usable])
    except TriangulationError:
        return _degenerate_graph(start, goal)

    vertices: list[NavVertex] = []
    face_vertex_ids: dict[tuple[int, int], list[int]] = {}

    for face in tri.faces:
        i, j = face
        est_i, est_j = usable[i], usable[j]
        try:
            p = safe_passage_probability_2d(est_i.belief(), est_j.belief(),
                                            params.robot_width)
        except CoincidentObstaclesError:
            p = 0.0
        zone_i = classify_zone(est_i, start, params.r_short)
        zone_j = classify_zone(est_j, start, params.r_short)
        zone = RangeZone.SHORT if (zone_i == RangeZone.SHORT and
                                   zone_j == RangeZone.SHORT) else RangeZone.LONG

        if p >= params.p_target:
            positions = _face_vertex_positions(est_i, est_j, p, params)
        elif zone == RangeZone.LONG and p > 0.0:
            mid = 0.5 * (est_i.position_mean + est_j.position_mean)
            positions = [tuple(mid)]
        else:
            # Unsafe short-range face, or p underflowed to zero: no vertex.
            positions = []

        ids = []
        c_safe = max(0.0, -math.log(p)) if p > 0.0 else math.inf
        for (x, y) in positions:
            vid = len(vertices)
            vertices.append(NavVertex(vid, Point2(x, y), p, c_safe, zone, face))
            ids.append(vid)
        if ids:
            face_vertex_ids[face] = ids

    edges: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()

    def add_edge(u: int, v: int):
        key = (u, v) if u < v else (v, u)
        if key in seen:
            return
        seen.add(key)
        edges.append((key[0], key[1],
                      vertices[u].position.distance_to(vertices[v].position)))

    # Connect vertices across the faces of each triangular cell.
    for (i, j, k) in tri.triangles:
        cell_faces = [(i, j), (j, k), (i, k)]
        for a in range(3):
            for b in range(a + 1, 3):
                for u in face_vertex_ids.get(cell_faces[a], []):
                    for v in face_vertex_ids.get(cell_faces[b], []):
                        add_edge(u, v)

    # Start and goal vertices carry no safety cost.
    start_id = len(vertices)
    vertices.append(NavVertex(start_id, start, 1.0, 0.0, RangeZone.SHORT, None))
    goal_id = len(vertices)
    vertices.append(NavVertex(goal_id, goal, 1.0, 0.0, RangeZone.LONG, None))

    sites = np.array([[p.x, p.y] for p in tri.sites])

    def attach(point: Point2, point_id: int):
        containing = None
        for t_idx, (i, j, k) in enumerate(tri.triangles):
            if _point_in_triangle(point.x, point.y, sites[i], sites[j], sites[k]):
                containing = t_idx
                break
        if containing is not None:
            i, j, k = tri.triangles[containing]
            targets = []
            for face in ((i, j), (j, k), (i, k)):
                targets.extend(face_vertex_ids.get(face, []))
        else:
            # Outside the triangulation: connect to visible hull-face
            # vertices. A vertex is visible when the sight segment strictly
            # crosses no other face (touching a face endpoint is fine).
            targets = []
            hull = tri.hull_faces()
            for face in hull:
                for vid in face_vertex_ids.get(face, []):
                    vp = vertices[vid].position
                    blocked = False
                    for other in tri.faces:
                        if other == face:
                            continue
                        a, b = other
                        if segment_strictly_crosses(
                                point, vp,
                                Point2(*sites[a]), Point2(*sites[b])):
                            blocked = True
                            break
                    if not blocked:
                        targets.append(vid)
        for vid in targets:
            add_edge(point_id, vid)

    attach(start, start_id)
    attach(goal, goal_id)
    return NavGraph(vertices, edges, start_id, goal_id)

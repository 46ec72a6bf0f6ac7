"""
Multiple-hypothesis path planning over the navigation graph.

Candidate paths are shortest paths under hypotheses, where a hypothesis
marks a subset of graph vertices unsafe. Starting from the plain shortest
path, the planner repeatedly blocks the enqueued vertex most likely to be
unsafe (max product of per-vertex unsafe likelihoods along the blocked
chain) and re-plans, until a path meets the target safety probability or
the hypothesis budget is exhausted. Candidates are scored by normalized
distance and safety costs; the local goal is read off the best path at a
fixed plan-ahead arc length.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

from .geometry import Point2
from .navgraph import NavGraph, RangeZone


@dataclass(frozen=True)
class Hypothesis:
    """Vertices assumed unsafe; never contains the start or goal."""

    blocked: frozenset[int] = frozenset()

    def block(self, vertex_id: int) -> "Hypothesis":
        return Hypothesis(self.blocked | {vertex_id})


@dataclass(frozen=True)
class CandidatePath:
    vertices: tuple[int, ...]
    c_dist_raw: float
    c_safe_raw: float
    p_path: float
    vertex_p_safe: tuple[float, ...] = ()
    blocked: frozenset[int] = frozenset()  # hypothesis this path was planned under


@dataclass(frozen=True)
class PlannerParams:
    n_hyp: int = 5
    p_target: float = 0.95
    p_min: float = 0.0
    alpha_dist: float = 1.0
    alpha_safe: float = 1.0
    d_local: float = 5.0

    def __post_init__(self):
        if self.n_hyp < 1:
            raise ValueError(f"n_hyp must be >= 1, got {self.n_hyp}")
        if not self.p_min < self.p_target:
            raise ValueError("p_min must be < p_target")


def _make_path(graph: NavGraph, ids: list[int], dist: float,
               hypothesis: Hypothesis) -> CandidatePath:
    p_safes = tuple(graph.vertex(v).p_safe for v in ids)
    p_path = 1.0
    c_safe = 0.0
    for v in ids:
        vert = graph.vertex(v)
        p_path *= vert.p_safe
        c_safe += vert.c_safe
    return CandidatePath(tuple(ids), dist, c_safe, p_path, p_safes,
                         hypothesis.blocked)


def shortest_path(graph: NavGraph, hypothesis: Hypothesis) -> CandidatePath | None:
    """Minimum-distance start-goal path avoiding blocked vertices.

    Dijkstra with blocked vertices skipped during relaxation; edge costs
    are non-negative Euclidean distances. Returns None when disconnected.
    """
    start, goal = graph.start_id, graph.goal_id
    blocked = hypothesis.blocked
    if start in blocked or goal in blocked:
        return None
    dist: dict[int, float] = {start: 0.0}
    prev: dict[int, int] = {}
    pq: list[tuple[float, int]] = [(0.0, start)]
    done: set[int] = set()
    while pq:
        d, u = heapq.heappop(pq)
        if u in done:
            continue
        if u == goal:
            ids = [goal]
            while ids[-1] != start:
                ids.append(prev[ids[-1]])
            ids.reverse()
            return _make_path(graph, ids, d, hypothesis)
        done.add(u)
        for v, c in graph.adjacency.get(u, []):
            if v in blocked or v in done:
                continue
            nd = d + c
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(pq, (nd, v))
    return None


def short_zone_safety(graph: NavGraph, path: CandidatePath) -> float:
    """Safety product over only the short-range-zone vertices of a path."""
    p = 1.0
    for v in path.vertices:
        vert = graph.vertex(v)
        if vert.zone == RangeZone.SHORT:
            p *= vert.p_safe
    return p


def generate_candidates(graph: NavGraph, params: PlannerParams) -> list[CandidatePath]:
    """Candidate paths under up to n_hyp environment hypotheses.

    The initial hypothesis blocks only vertices below p_min. Every accepted
    candidate must keep its short-range safety product at or above
    p_target; duplicates (identical vertex sequences) are dropped. The
    search ends as soon as an accepted path reaches p_target overall, or
    when the hypothesis budget is reached. May return an empty list.
    """
    h0 = Hypothesis(frozenset(
        v.id for v in graph.vertices
        if v.p_safe < params.p_min and v.id not in (graph.start_id, graph.goal_id)))
    p0 = shortest_path(graph, h0)
    if p0 is None:
        return []

    candidates: list[CandidatePath] = []
    sequences: set[tuple[int, ...]] = set()
    counter = itertools.count()
    # Max-first on the unsafe likelihood: heap keyed by negated magnitude;
    # the counter breaks ties deterministically (FIFO).
    queue: list[tuple[float, int, int, Hypothesis]] = []

    def enqueue(path: CandidatePath, hyp: Hypothesis, parent_priority: float):
        for v in path.vertices:
            if v in (graph.start_id, graph.goal_id):
                continue
            p_safe = graph.vertex(v).p_safe
            if p_safe >= 1.0:
                continue  # blocking a certainly-safe vertex explains nothing
            magnitude = (1.0 - p_safe) * parent_priority
            heapq.heappush(queue, (-magnitude, next(counter), v, hyp))

    def accept(path: CandidatePath) -> bool:
        candidates.append(path)
        sequences.add(path.vertices)
        return path.p_path >= params.p_target

    if short_zone_safety(graph, p0) >= params.p_target:
        if accept(p0):
            return candidates
    enqueue(p0, h0, 1.0)

    seen_hypotheses: set[frozenset[int]] = {h0.blocked}
    while len(candidates) < params.n_hyp and queue:
        neg_mag, _, v, parent_hyp = heapq.heappop(queue)
        child = parent_hyp.block(v)
        if child.blocked in seen_hypotheses:
            continue
        seen_hypotheses.add(child.blocked)
        path = shortest_path(graph, child)
        if path is None:
            continue
        if short_zone_safety(graph, path) < params.p_target:
            continue
        if path.vertices in sequences:
            continue
        if accept(path):
            break
        enqueue(path, child, -neg_mag)
    return candidates


def evaluate_candidates(paths: list[CandidatePath], alpha_dist: float,
                        alpha_safe: float) -> CandidatePath:
    """Best path by normalized distance/safety cost.

    Both costs are divided by their maxima over the set before weighting,
    so the trade-off is scale-free. Ties break on raw distance, then on the
    vertex-id sequence.
    """
    if not paths:
        raise ValueError("paths must be non-empty")
    max_dist = max(p.c_dist_raw for p in paths) or 1.0
    max_safe = max(p.c_safe_raw for p in paths) or 1.0

    def total(p: CandidatePath) -> float:
        return (alpha_dist * (p.c_dist_raw / max_dist)
                + alpha_safe * (p.c_safe_raw / max_safe))

    return min(paths, key=lambda p: (total(p), p.c_dist_raw, p.vertices))


def local_goal(best: CandidatePath, graph: NavGraph, robot: Point2,
               d_local: float) -> Point2:
    """Point a fixed arc length ahead along the best path's polyline.

    Walks the vertex positions from the path start; if the whole path is
    shorter than d_local, returns the final (goal) position.
    """
    if not best.vertices:
        raise ValueError("path must be non-empty")
    points = [graph.vertex(v).position for v in best.vertices]
    remaining = d_local
    for a, b in zip(points[:-1], points[1:]):
        seg = a.distance_to(b)
        if seg >= remaining and seg > 0.0:
            t = remaining / seg
            return Point2(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
        remaining -= seg
    return points[-1]


def collision_bounds(path: CandidatePath) -> tuple[float, float]:
    """(independence-assumption collision probability, worst-case lower bound).

    The first assumes vertex safeties independent: 1 - prod(p_safe). The
    second keeps only the least safe vertex: 1 - min(p_safe). The first
    always dominates the second.
    """
    p_safes = [p for p in path.vertex_p_safe]
    if not p_safes:
        return 0.0, 0.0
    prod = 1.0
    for p in p_safes:
        prod *= p
    return 1.0 - prod, 1.0 - min(p_safes)

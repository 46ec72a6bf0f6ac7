import math

import numpy as np
import pytest

from forestnav.estimation import LandmarkEstimate
from forestnav.geometry import Point2
from forestnav.navgraph import (
    GraphParams,
    NavGraph,
    RangeZone,
    build_navigation_graph,
    classify_zone,
    filter_estimates_for_graph,
)


def lm(lm_id, x, y, d=0.4, pos_var=1e-4, d_var=1e-4, n=10):
    return LandmarkEstimate(lm_id, np.array([x, y], float), np.eye(2) * pos_var,
                            d, d_var, n)


PARAMS = GraphParams(p_target=0.95, r_short=7.5, robot_width=0.5,
                     max_graph_range=15.0)


class TestClassifyZone:

    def test_short(self):
        assert classify_zone(lm(0, 3, 0), Point2(0, 0), 7.5) == RangeZone.SHORT

    def test_boundary_is_short(self):
        assert classify_zone(lm(0, 7.5, 0), Point2(0, 0), 7.5) == RangeZone.SHORT

    def test_long(self):
        assert classify_zone(lm(0, 12, 0), Point2(0, 0), 7.5) == RangeZone.LONG


class TestFilterEstimates:

    def test_range_and_maturity(self):
        robot = Point2(0, 0)
        ests = [lm(0, 5, 0), lm(1, 20, 0), lm(2, 3, 0, n=1)]
        kept = filter_estimates_for_graph(ests, robot, 15.0)
        assert [e.id for e in kept] == [0]


class TestBuildGraph:

    def test_single_cell_all_safe(self):
        # Wide triangle around the robot: all three faces comfortably safe.
        ests = [lm(0, -4, -4), lm(1, 4, -4), lm(2, 0, 5)]
        start = Point2(0, -1)
        goal = Point2(0, 40)
        g = build_navigation_graph(ests, start, goal, PARAMS)
        face_vertices = [v for v in g.vertices if v.face is not None]
        faces_hit = {v.face for v in face_vertices}
        assert faces_hit == {(0, 1), (1, 2), (0, 2)}
        # Start inside the cell connects to every face vertex.
        start_nbrs = {v for v, _ in g.adjacency[g.start_id]}
        assert start_nbrs == {v.id for v in face_vertices}
        # Across-face connectivity within the cell.
        for u in face_vertices:
            nbrs = {w for w, _ in g.adjacency[u.id]}
            for v in face_vertices:
                if v.face != u.face:
                    assert v.id in nbrs

    def test_unsafe_short_face_has_no_vertex(self):
        # Two nearly touching obstacles close to the robot, a third off axis.
        ests = [lm(0, 2, -0.3), lm(1, 2, 0.3), lm(2, 5, 4)]
        g = build_navigation_graph(ests, Point2(0, 0), Point2(10, 0), PARAMS)
        faces_hit = {v.face for v in g.vertices if v.face is not None}
        assert (0, 1) not in faces_hit
        assert faces_hit  # the other, safe faces did get vertices

    def test_unsafe_long_face_gets_midpoint(self):
        ests = [lm(0, 12, -0.3), lm(1, 12, 0.3), lm(2, 14, 8)]
        g = build_navigation_graph(ests, Point2(0, 0), Point2(20, 0), PARAMS)
        vs = [v for v in g.vertices if v.face == (0, 1)]
        assert len(vs) == 1
        v = vs[0]
        assert v.zone == RangeZone.LONG
        assert v.p_safe < PARAMS.p_target
        assert v.position.x == pytest.approx(12.0)
        assert v.position.y == pytest.approx(0.0)
        assert v.c_safe == pytest.approx(-math.log(v.p_safe))

    def test_wide_safe_face_gets_multiple_vertices(self):
        ests = [lm(0, 5, -4), lm(1, 5, 4), lm(2, 9, 0)]
        g = build_navigation_graph(ests, Point2(0, 0), Point2(15, 0), PARAMS)
        vs = [v for v in g.vertices if v.face == (0, 1)]
        assert 2 <= len(vs) <= PARAMS.max_face_vertices
        # Spread along the face segment between the obstacles.
        ys = sorted(v.position.y for v in vs)
        assert ys[0] < -1.0 and ys[-1] > 1.0
        assert all(v.position.x == pytest.approx(5.0) for v in vs)

    def test_degenerate_world_connects_start_goal(self):
        g = build_navigation_graph([lm(0, 5, 5)], Point2(0, 0), Point2(10, 0), PARAMS)
        assert len(g.vertices) == 2
        assert g.edges[0][2] == pytest.approx(10.0)

    def test_invariants_random_world(self):
        rng = np.random.default_rng(8)
        ests = [lm(i, *rng.uniform(-12, 12, 2), d=rng.uniform(0.2, 0.8),
                   pos_var=rng.uniform(1e-4, 0.05)) for i in range(40)]
        start, goal = Point2(0, 0), Point2(30, 0)
        g = build_navigation_graph(ests, start, goal, PARAMS)
        by_face: dict = {}
        for v in g.vertices:
            if v.face is None:
                assert v.p_safe == 1.0 and v.c_safe == 0.0
                continue
            by_face.setdefault(v.face, []).append(v)
            assert v.c_safe == pytest.approx(-math.log(v.p_safe))
            if v.zone == RangeZone.SHORT:
                assert v.p_safe >= PARAMS.p_target
        for face, vs in by_face.items():
            p = vs[0].p_safe
            assert all(v.p_safe == p for v in vs)
            if p < PARAMS.p_target:
                assert len(vs) == 1
            else:
                assert len(vs) >= 1
        # Edge costs recomputable from the endpoint positions.
        for u, v, c in g.edges:
            assert c == pytest.approx(
                g.vertex(u).position.distance_to(g.vertex(v).position))

    def test_vertices_never_have_zero_p_safe(self):
        # Overlapping estimated discs at long range: p underflows to 0 and
        # the face must stay vertex-free rather than produce infinite cost.
        ests = [lm(0, 12, -0.05), lm(1, 12, 0.05), lm(2, 14, 8)]
        g = build_navigation_graph(ests, Point2(0, 0), Point2(20, 0), PARAMS)
        for v in g.vertices:
            assert v.p_safe > 0.0

    def test_zone_from_either_obstacle_long(self):
        ests = [lm(0, 5, -2), lm(1, 5, 2), lm(2, 14, 0)]
        g = build_navigation_graph(ests, Point2(0, 0), Point2(20, 0), PARAMS)
        for v in g.vertices:
            if v.face is None:
                continue
            if v.face == (0, 1):
                assert v.zone == RangeZone.SHORT
            else:
                # Faces touching obstacle 2 (14 m away) are long range.
                assert v.zone == RangeZone.LONG

    def test_short_world_graph_unaffected_by_graph_range(self):
        # With every estimate inside r_short, the graph must not depend on
        # max_graph_range at all.
        rng = np.random.default_rng(4)
        ests = [lm(i, *rng.uniform(-5, 5, 2)) for i in range(12)]
        g1 = build_navigation_graph(ests, Point2(0, 0), Point2(6, 0), PARAMS)
        params2 = GraphParams(p_target=0.95, r_short=7.5, robot_width=0.5,
                              max_graph_range=7.5)
        g2 = build_navigation_graph(ests, Point2(0, 0), Point2(6, 0), params2)
        assert [(v.position, v.p_safe, v.zone) for v in g1.vertices] == \
               [(v.position, v.p_safe, v.zone) for v in g2.vertices]
        assert g1.edges == g2.edges
        assert all(v.zone == RangeZone.SHORT for v in g1.vertices if v.face)

    def test_goal_outside_hull_attaches_by_visibility(self):
        ests = [lm(0, 2, -2), lm(1, 2, 2), lm(2, 4, 0)]
        g = build_navigation_graph(ests, Point2(0, 0), Point2(20, 0), PARAMS)
        goal_nbrs = [v for v, _ in g.adjacency[g.goal_id]]
        assert goal_nbrs, "goal must attach to visible boundary vertices"
        # Everything it attached to sits on a hull face.
        hull = {(0, 2), (1, 2), (0, 1)}
        for vid in goal_nbrs:
            assert g.vertex(vid).face in hull

    def test_deterministic(self):
        rng = np.random.default_rng(10)
        ests = [lm(i, *rng.uniform(-10, 10, 2)) for i in range(25)]
        g1 = build_navigation_graph(ests, Point2(0, 0), Point2(12, 0), PARAMS)
        g2 = build_navigation_graph(ests, Point2(0, 0), Point2(12, 0), PARAMS)
        assert [(v.id, v.position, v.p_safe) for v in g1.vertices] == \
               [(v.id, v.position, v.p_safe) for v in g2.vertices]
        assert g1.edges == g2.edges

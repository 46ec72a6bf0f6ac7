"""
Kinematically feasible local planning and the 2D grid baseline planner.

Hybrid A* searches over continuous poses reached by chaining fixed motion
primitives (constant-curvature forward arcs plus optional in-place
rotations for a differential drive), deduplicating states on a coarse
x/y/heading grid. Collision checking bloats every obstacle by half the
robot width and treats the robot as a point, sampling primitives densely
enough that the continuous sweep keeps positive clearance.

The smoother moves interior waypoints by gradient descent on a smoothness
term plus a quadratic penalty on clearance below a threshold; steps are
only accepted if the cost decreases and the exact polyline minimum
clearance does not shrink, so the smoother can never make a path worse.

The baseline planner is a plain 8-connected A* over a fixed-resolution
occupancy grid of the obstacle means, ignoring estimate uncertainty.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Point2, Pose2, normalize_angle

WaypointPath = list[Point2]


@dataclass(frozen=True)
class MotionPrimitive:
    curvature: float
    arc_length: float
    cost_multiplier: float = 1.0

    def __post_init__(self):
        if self.arc_length <= 0.0:
            raise ValueError("arc length must be > 0")


@dataclass(frozen=True)
class LocalPlannerParams:
    robot_width: float = 0.5
    grid_resolution: float = 0.5
    angle_bins: int = 72
    kappa_max: float = 0.8
    rotation_step: float = math.pi / 6.0  # 0 disables in-place rotations
    rotation_cost: float = 0.3
    goal_tolerance: float = 0.5
    window_half: float = 10.0
    collision_margin: float = 0.03
    collision_step: float = 0.02
    waypoint_spacing: float = 0.25
    max_expansions: int = 6000
    heuristic_weight: float = 1.2
    # Smoother settings.
    smooth_weight: float = 1.0
    obstacle_weight: float = 0.5
    clearance_threshold: float | None = None  # defaults to robot_width
    smooth_iterations: int = 100
    smooth_step: float = 0.1

    @property
    def arc_length(self) -> float:
        return 1.5 * self.grid_resolution

    @property
    def clearance_target(self) -> float:
        return self.robot_width if self.clearance_threshold is None else self.clearance_threshold

    def primitives(self) -> list[MotionPrimitive]:
        k = self.kappa_max
        return [MotionPrimitive(c, self.arc_length)
                for c in (-k, -k / 2.0, 0.0, k / 2.0, k)]


def _obstacle_arrays(obstacles) -> tuple[np.ndarray, np.ndarray]:
    if not obstacles:
        return np.zeros((0, 2)), np.zeros(0)
    centers = np.array([[c.x if isinstance(c, Point2) else c[0],
                         c.y if isinstance(c, Point2) else c[1]]
                        for c, _ in obstacles], dtype=float)
    radii = np.array([r for _, r in obstacles], dtype=float)
    return centers, radii


def _arc_samples(curvature: float, length: float, step: float) -> np.ndarray:
    """Sample points (x, y, heading) along an arc from the origin pose."""
    n = max(1, int(math.ceil(length / step)))
    s = np.linspace(length / n, length, n)
    if abs(curvature) < 1e-12:
        return np.column_stack([s, np.zeros_like(s), np.zeros_like(s)])
    return np.column_stack([np.sin(curvature * s) / curvature,
                            (1.0 - np.cos(curvature * s)) / curvature,
                            curvature * s])


def polyline_min_clearance(xy: np.ndarray, centers: np.ndarray,
                           radii: np.ndarray) -> float:
    """Exact minimum clearance of a polyline from a set of discs."""
    if len(centers) == 0 or len(xy) == 0:
        return math.inf
    if len(xy) == 1:
        d = np.hypot(centers[:, 0] - xy[0, 0], centers[:, 1] - xy[0, 1]) - radii
        return float(d.min())
    a = xy[:-1]
    ab = xy[1:] - a
    denom = (ab * ab).sum(axis=1)
    safe = np.where(denom == 0.0, 1.0, denom)
    diff = centers[None, :, :] - a[:, None, :]
    t = np.clip((diff * ab[:, None, :]).sum(axis=2) / safe[:, None], 0.0, 1.0)
    proj = a[:, None, :] + t[..., None] * ab[:, None, :]
    d = np.hypot(centers[None, :, 0] - proj[..., 0],
                 centers[None, :, 1] - proj[..., 1]) - radii[None, :]
    return float(d.min())


class _HybridSearch:

    def __init__(self, start: Pose2, goal: Point2, obstacles, params: LocalPlannerParams):
        self.params = params
        self.goal = goal
        half = max(params.window_half,
                   math.hypot(goal.x - start.x, goal.y - start.y) + 2.0)
        self.x0 = start.x - half
        self.y0 = start.y - half
        self.half = half
        self.res = params.grid_resolution
        self.n_cells = int(math.ceil(2.0 * half / self.res))

        centers, radii = _obstacle_arrays(obstacles)
        bloat = radii + params.robot_width / 2.0
        keep = ((centers[:, 0] > self.x0 - bloat - 1.0)
                & (centers[:, 0] < self.x0 + 2 * half + bloat + 1.0)
                & (centers[:, 1] > self.y0 - bloat - 1.0)
                & (centers[:, 1] < self.y0 + 2 * half + bloat + 1.0)
                if len(centers) else np.zeros(0, dtype=bool))
        self.centers = centers[keep]
        self.bloated = bloat[keep]

        # When the robot starts closer to an obstacle than the nominal
        # margin, relax the margin so escape maneuvers remain plannable;
        # the planned path then never gets closer than the robot already is.
        start_clear = self._clearance(start.x, start.y)
        self.margin = min(params.collision_margin, start_clear - 0.01)
        self.margin = max(self.margin, -0.10)

    def _clearance(self, x: float, y: float) -> float:
        if len(self.centers) == 0:
            return math.inf
        d = np.hypot(self.centers[:, 0] - x, self.centers[:, 1] - y) - self.bloated
        return float(d.min())

    def _nearby(self, x: float, y: float, reach: float) -> tuple[np.ndarray, np.ndarray]:
        if len(self.centers) == 0:
            return self.centers, self.bloated
        d = np.hypot(self.centers[:, 0] - x, self.centers[:, 1] - y)
        mask = d <= reach + self.bloated + self.margin
        return self.centers[mask], self.bloated[mask]

    def samples_collide(self, pts: np.ndarray, centers, bloated) -> bool:
        if len(centers) == 0:
            return False
        d2 = ((pts[:, None, 0] - centers[None, :, 0]) ** 2
              + (pts[:, None, 1] - centers[None, :, 1]) ** 2)
        limit = (bloated + self.margin) ** 2
        return bool(np.any(d2 < limit[None, :]))

    def heuristic_field(self) -> np.ndarray:
        """Obstacle-aware 2D distance-to-goal over the window grid."""
        n = self.n_cells
        blocked = np.zeros((n, n), dtype=bool)
        if len(self.centers):
            cx = ((np.arange(n) + 0.5) * self.res + self.x0)
            cy = ((np.arange(n) + 0.5) * self.res + self.y0)
            for (ox, oy), r in zip(self.centers, self.bloated):
                i_lo = max(0, int((ox - r - self.x0) / self.res) - 1)
                i_hi = min(n - 1, int((ox + r - self.x0) / self.res) + 1)
                j_lo = max(0, int((oy - r - self.y0) / self.res) - 1)
                j_hi = min(n - 1, int((oy + r - self.y0) / self.res) + 1)
                if i_lo > i_hi or j_lo > j_hi:
                    continue
                xs = cx[i_lo:i_hi + 1]
                ys = cy[j_lo:j_hi + 1]
                d2 = (xs[:, None] - ox) ** 2 + (ys[None, :] - oy) ** 2
                blocked[i_lo:i_hi + 1, j_lo:j_hi + 1] |= d2 < r * r

        dist = np.full((n, n), np.inf)
        gi = min(n - 1, max(0, int((self.goal.x - self.x0) / self.res)))
        gj = min(n - 1, max(0, int((self.goal.y - self.y0) / self.res)))
        blocked[gi, gj] = False
        dist[gi, gj] = 0.0
        pq = [(0.0, gi, gj)]
        moves = [(di, dj, self.res * math.hypot(di, dj))
                 for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj]
        while pq:
            d, i, j = heapq.heappop(pq)
            if d > dist[i, j]:
                continue
            for di, dj, step in moves:
                ni, nj = i + di, j + dj
                if 0 <= ni < n and 0 <= nj < n and not blocked[ni, nj]:
                    nd = d + step
                    if nd < dist[ni, nj]:
                        dist[ni, nj] = nd
                        heapq.heappush(pq, (nd, ni, nj))
        return dist

    def cell_of(self, x: float, y: float, theta: float) -> tuple[int, int, int]:
        i = int((x - self.x0) / self.res)
        j = int((y - self.y0) / self.res)
        k = int(((theta % (2.0 * math.pi)) / (2.0 * math.pi)) * self.params.angle_bins) \
            % self.params.angle_bins
        return i, j, k

    def in_window(self, x: float, y: float) -> bool:
        return (self.x0 <= x < self.x0 + 2 * self.half
                and self.y0 <= y < self.y0 + 2 * self.half)


def hybrid_astar(start: Pose2, goal: Point2, obstacles,
                 params: LocalPlannerParams) -> WaypointPath | None:
    """Kinematically feasible waypoint path from a pose to a nearby goal.

    `obstacles` is a list of (center, radius) pairs. Returns None when the
    search exhausts the local window without reaching the goal tolerance.
    """
    search = _HybridSearch(start, goal, obstacles, params)
    goal_centers, goal_bloated = search._nearby(goal.x, goal.y, 0.0)
    if search.samples_collide(np.array([[goal.x, goal.y]]), goal_centers,
                              goal_bloated):
        return None

    hfield = search.heuristic_field()
    res = search.res

    def heuristic(x: float, y: float) -> float:
        euclid = math.hypot(goal.x - x, goal.y - y)
        i = int((x - search.x0) / res)
        j = int((y - search.y0) / res)
        if 0 <= i < search.n_cells and 0 <= j < search.n_cells:
            grid_d = hfield[i, j]
            if math.isfinite(grid_d):
                return max(euclid, grid_d)
        return euclid

    primitives = params.primitives()
    prim_samples = [_arc_samples(p.curvature, p.arc_length, params.collision_step)
                    for p in primitives]
    # Waypoint-spaced samples of the same arcs, for path reconstruction.
    prim_way = [_arc_samples(p.curvature, p.arc_length, params.waypoint_spacing)
                for p in primitives]

    # Node storage: (x, y, theta, parent_index, primitive_index)
    nodes: list[tuple[float, float, float, int, int]] = [
        (start.x, start.y, start.theta, -1, -1)]
    best_g: dict[tuple[int, int, int], float] = {
        search.cell_of(start.x, start.y, start.theta): 0.0}
    counter = 0
    h0 = heuristic(start.x, start.y)
    pq: list[tuple[float, int, float, int]] = [(params.heuristic_weight * h0, 0, 0.0, 0)]
    expansions = 0

    while pq and expansions < params.max_expansions:
        _, _, g, node_idx = heapq.heappop(pq)
        x, y, theta, _, _ = nodes[node_idx]
        cell = search.cell_of(x, y, theta)
        if g > best_g.get(cell, math.inf):
            continue
        if math.hypot(goal.x - x, goal.y - y) <= params.goal_tolerance:
            return _reconstruct(search, nodes, node_idx, prim_way, goal, params)
        expansions += 1

        c, s = math.cos(theta), math.sin(theta)
        near_c, near_b = search._nearby(x, y, params.arc_length)
        for p_idx, prim in enumerate(primitives):
            local = prim_samples[p_idx]
            wx = x + c * local[:, 0] - s * local[:, 1]
            wy = y + s * local[:, 0] + c * local[:, 1]
            if not np.all((search.x0 <= wx) & (wx < search.x0 + 2 * search.half)
                          & (search.y0 <= wy) & (wy < search.y0 + 2 * search.half)):
                continue
            if search.samples_collide(np.column_stack([wx, wy]), near_c, near_b):
                continue
            nx, ny = float(wx[-1]), float(wy[-1])
            ntheta = normalize_angle(theta + local[-1, 2])
            ng = g + prim.arc_length * prim.cost_multiplier
            ncell = search.cell_of(nx, ny, ntheta)
            if ng < best_g.get(ncell, math.inf) - 1e-12:
                best_g[ncell] = ng
                nodes.append((nx, ny, ntheta, node_idx, p_idx))
                counter += 1
                f = ng + params.heuristic_weight * heuristic(nx, ny)
                heapq.heappush(pq, (f, counter, ng, len(nodes) - 1))

        if params.rotation_step > 0.0:
            for dtheta in (params.rotation_step, -params.rotation_step):
                ntheta = normalize_angle(theta + dtheta)
                ncell = search.cell_of(x, y, ntheta)
                ng = g + params.rotation_cost
                if ng < best_g.get(ncell, math.inf) - 1e-12:
                    best_g[ncell] = ng
                    nodes.append((x, y, ntheta, node_idx, -1))
                    counter += 1
                    f = ng + params.heuristic_weight * heuristic(x, y)
                    heapq.heappush(pq, (f, counter, ng, len(nodes) - 1))
    return None


def _bend_curvature(a, b, c) -> float:
    """Inverse circumradius of three consecutive waypoints (0 if collinear)."""
    if a is None:
        return 0.0
    area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    if area2 < 1e-12:
        return 0.0
    d_ab = math.hypot(b[0] - a[0], b[1] - a[1])
    d_bc = math.hypot(c[0] - b[0], c[1] - b[1])
    d_ac = math.hypot(c[0] - a[0], c[1] - a[1])
    return 2.0 * area2 / (d_ab * d_bc * d_ac)


def _reconstruct(search: _HybridSearch, nodes, node_idx: int, prim_way,
                 goal: Point2, params: LocalPlannerParams) -> WaypointPath:
    chain = []
    idx = node_idx
    while idx != -1:
        chain.append(idx)
        idx = nodes[idx][3]
    chain.reverse()

    points: list[tuple[float, float]] = [(nodes[chain[0]][0], nodes[chain[0]][1])]
    for idx in chain[1:]:
        x, y, theta, parent, p_idx = nodes[idx]
        if p_idx == -1:
            continue  # in-place rotation: no translation
        px, py, ptheta, _, _ = nodes[parent]
        c, s = math.cos(ptheta), math.sin(ptheta)
        local = prim_way[p_idx]
        for lx, ly, _ in local:
            points.append((px + c * lx - s * ly, py + s * lx + c * ly))

    # Close the small gap to the exact goal when that segment is clear and
    # the bend it introduces stays within the primitive curvature limit.
    last = points[-1]
    if (last[0] - goal.x) ** 2 + (last[1] - goal.y) ** 2 > 1e-12:
        gap = math.hypot(goal.x - last[0], goal.y - last[1])
        n = max(1, int(math.ceil(gap / params.collision_step)))
        ts = np.linspace(0.0, 1.0, n + 1)[1:]
        seg = np.column_stack([last[0] + ts * (goal.x - last[0]),
                               last[1] + ts * (goal.y - last[1])])
        near_c, near_b = search._nearby(last[0], last[1], gap)
        if (_bend_curvature(points[-2] if len(points) > 1 else None, last,
                            (goal.x, goal.y)) <= params.kappa_max
                and not search.samples_collide(seg, near_c, near_b)):
            points.append((goal.x, goal.y))

    deduped: list[tuple[float, float]] = []
    for p in points:
        if not deduped or (p[0] - deduped[-1][0]) ** 2 + (p[1] - deduped[-1][1]) ** 2 > 1e-16:
            deduped.append(p)
    return [Point2(x, y) for x, y in deduped]


def smooth_path(path: WaypointPath, obstacles, params: LocalPlannerParams) -> WaypointPath:
    """Gradient-descent smoothing that never reduces minimum clearance.

    Cost is w_smooth * sum of squared second differences plus w_obs * a
    quadratic penalty on waypoint clearance below the clearance threshold.
    The step size halves whenever a step would raise the cost or shrink
    the exact polyline clearance; endpoints stay fixed.
    """
    if len(path) < 3:
        return path
    xy = np.array([[p.x, p.y] for p in path])
    centers, radii = _obstacle_arrays(obstacles)
    bloated = radii + params.robot_width / 2.0
    threshold = params.clearance_target

    def waypoint_clearances(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = np.hypot(pts[:, None, 0] - centers[None, :, 0],
                     pts[:, None, 1] - centers[None, :, 1])
        nearest = d.argmin(axis=1)
        rows = np.arange(len(pts))
        return d[rows, nearest] - bloated[nearest], nearest

    def cost(pts: np.ndarray) -> float:
        second = pts[:-2] - 2.0 * pts[1:-1] + pts[2:]
        smooth = float((second * second).sum())
        if len(centers) == 0:
            return params.smooth_weight * smooth
        clear, _ = waypoint_clearances(pts)
        short = np.minimum(clear - threshold, 0.0)
        return params.smooth_weight * smooth + params.obstacle_weight * float(
            (short * short).sum())

    def gradient(pts: np.ndarray) -> np.ndarray:
        grad = np.zeros_like(pts)
        second = pts[:-2] - 2.0 * pts[1:-1] + pts[2:]
        grad[:-2] += 2.0 * second
        grad[1:-1] += -4.0 * second
        grad[2:] += 2.0 * second
        grad *= params.smooth_weight
        if len(centers):
            clear, nearest = waypoint_clearances(pts)
            active = clear < threshold
            if np.any(active):
                centers_n = centers[nearest[active]]
                delta = pts[active] - centers_n
                dist = np.hypot(delta[:, 0], delta[:, 1])
                dist = np.where(dist == 0.0, 1.0, dist)
                unit = delta / dist[:, None]
                grad[active] += (params.obstacle_weight * 2.0
                                 * (clear[active] - threshold))[:, None] * unit
        grad[0] = 0.0
        grad[-1] = 0.0
        return grad

    current_cost = cost(xy)
    current_clear = polyline_min_clearance(xy, centers, bloated)
    step = params.smooth_step
    for _ in range(params.smooth_iterations):
        cand = xy - step * gradient(xy)
        cand_cost = cost(cand)
        cand_clear = polyline_min_clearance(cand, centers, bloated)
        if cand_cost < current_cost - 1e-12 and cand_clear >= current_clear - 1e-12:
            xy = cand
            current_cost = cand_cost
            current_clear = max(current_clear, cand_clear)
        else:
            step *= 0.5
            if step < 1e-6:
                break
    return [Point2(x, y) for x, y in xy]


def baseline_global_astar(start: Point2, goal: Point2, obstacles,
                          grid_resolution: float,
                          robot_width: float = 0.0) -> list[Point2] | None:
    """8-connected grid A* over the obstacle means, ignoring uncertainty.

    Cells intersecting any obstacle disc bloated by half the robot width
    are blocked; the octile heuristic keeps the search admissible, so the
    returned cost equals the true grid shortest path. Returns the polyline
    [start, cell centers..., goal] or None.
    """
    centers, radii = _obstacle_arrays(obstacles)
    bloated = radii + robot_width / 2.0
    pad = 1.0
    xs = [start.x, goal.x] + ([] if len(centers) == 0 else
                              [float(centers[:, 0].min()), float(centers[:, 0].max())])
    ys = [start.y, goal.y] + ([] if len(centers) == 0 else
                              [float(centers[:, 1].min()), float(centers[:, 1].max())])
    x0, y0 = min(xs) - pad, min(ys) - pad
    nx = int(math.ceil((max(xs) + pad - x0) / grid_resolution))
    ny = int(math.ceil((max(ys) + pad - y0) / grid_resolution))

    blocked = np.zeros((nx, ny), dtype=bool)
    for (ox, oy), r in zip(centers, bloated):
        i_lo = max(0, int((ox - r - x0) / grid_resolution) - 1)
        i_hi = min(nx - 1, int((ox + r - x0) / grid_resolution) + 1)
        j_lo = max(0, int((oy - r - y0) / grid_resolution) - 1)
        j_hi = min(ny - 1, int((oy + r - y0) / grid_resolution) + 1)
        if i_lo > i_hi or j_lo > j_hi:
            continue
        # Distance from the disc center to each cell square.
        cell_x = x0 + np.arange(i_lo, i_hi + 1) * grid_resolution
        cell_y = y0 + np.arange(j_lo, j_hi + 1) * grid_resolution
        nearest_x = np.clip(ox, cell_x[:, None], cell_x[:, None] + grid_resolution)
        nearest_y = np.clip(oy, cell_y[None, :], cell_y[None, :] + grid_resolution)
        d = np.hypot(nearest_x - ox, nearest_y - oy)
        blocked[i_lo:i_hi + 1, j_lo:j_hi + 1] |= d < r

    def cell(p: Point2) -> tuple[int, int]:
        return (min(nx - 1, max(0, int((p.x - x0) / grid_resolution))),
                min(ny - 1, max(0, int((p.y - y0) / grid_resolution))))

    start_cell = cell(start)
    goal_cell = cell(goal)
    if blocked[goal_cell]:
        return None
    blocked[start_cell] = False  # the robot stands here

    def octile(c: tuple[int, int]) -> float:
        dx = abs(c[0] - goal_cell[0])
        dy = abs(c[1] - goal_cell[1])
        return grid_resolution * (max(dx, dy) + (math.sqrt(2.0) - 1.0) * min(dx, dy))

    g_cost = {start_cell: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    pq = [(octile(start_cell), 0, 0.0, start_cell)]
    counter = 0
    moves = [(di, dj, grid_resolution * math.hypot(di, dj))
             for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj]
    closed: set[tuple[int, int]] = set()
    while pq:
        _, _, g, c = heapq.heappop(pq)
        if c in closed:
            continue
        closed.add(c)
        if c == goal_cell:
            cells = [c]
            while cells[-1] != start_cell:
                cells.append(came[cells[-1]])
            cells.reverse()
            pts = [start]
            pts += [Point2(x0 + (i + 0.5) * grid_resolution,
                           y0 + (j + 0.5) * grid_resolution) for i, j in cells]
            pts.append(goal)
            return pts
        for di, dj, step in moves:
            ncell = (c[0] + di, c[1] + dj)
            if not (0 <= ncell[0] < nx and 0 <= ncell[1] < ny):
                continue
            if blocked[ncell] or ncell in closed:
                continue
            ng = g + step
            if ng < g_cost.get(ncell, math.inf):
                g_cost[ncell] = ng
                came[ncell] = c
                counter += 1
                heapq.heappush(pq, (ng + octile(ncell), counter, ng, ncell))
    return None


def grid_path_cost(path: list[Point2], grid_resolution: float) -> float:
    """Grid cost of a baseline path (cell-center polyline, endpoints excluded)."""
    cells = path[1:-1]
    return sum(a.distance_to(b) for a, b in zip(cells[:-1], cells[1:]))

"""
Simulated range/bearing/diameter sensing and recursive landmark estimation.

Robot poses are assumed exactly known (odometry noise is negligible in the
simulation), which reduces estimation to a per-landmark mapping problem:
each landmark's 2D position is tracked by an EKF over range-bearing
measurements, and its diameter by an independent scalar Kalman filter.
Data association is greedy nearest-first on the Mahalanobis distance in
range-bearing space, gated at a chi-square threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Point2, Pose2, normalize_angle, point_segment_distance
from .safety import ObstacleBelief2D

# chi-square inverse CDF at 0.99 with 2 DOF: -2 ln(0.01).
DEFAULT_GATE = -2.0 * math.log(0.01)

# Diameters are clamped here; Gaussian updates can otherwise go negative.
MIN_DIAMETER = 0.01


@dataclass(frozen=True)
class Detection:
    range: float
    bearing: float
    diameter: float

    def __post_init__(self):
        if self.range <= 0.0:
            raise ValueError(f"range must be > 0, got {self.range}")
        if self.diameter <= 0.0:
            raise ValueError(f"diameter must be > 0, got {self.diameter}")


@dataclass(frozen=True)
class SensorParams:
    """Range/bearing/diameter sensor with range-dependent noise.

    Range noise grows quadratically with distance (stereo-like):
    sigma_r(r) = sigma_r0 + k_r * r^2. Diameter noise grows with range and
    true size: sigma_d(r, d) = sigma_d0 + k_d * d * (r / max_range).
    """

    max_range: float = 20.0
    fov: float = math.radians(110.0)
    sigma_r0: float = 0.02
    k_r: float = 0.0025
    sigma_phi: float = 0.01
    sigma_d0: float = 0.02
    k_d: float = 0.2
    detection_rate: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.fov <= 2.0 * math.pi:
            raise ValueError(f"fov must be in (0, 2*pi], got {self.fov}")
        for name in ("sigma_r0", "k_r", "sigma_phi", "sigma_d0", "k_d"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    def sigma_r(self, r: float) -> float:
        return self.sigma_r0 + self.k_r * r * r

    def sigma_d(self, r: float, d: float) -> float:
        return self.sigma_d0 + self.k_d * d * (r / self.max_range)


@dataclass
class LandmarkEstimate:
    id: int
    position_mean: np.ndarray
    position_cov: np.ndarray
    diameter_mean: float
    diameter_var: float
    num_updates: int = 1

    def __post_init__(self):
        self.position_mean = np.asarray(self.position_mean, dtype=float)
        self.position_cov = np.asarray(self.position_cov, dtype=float)

    def belief(self) -> ObstacleBelief2D:
        return ObstacleBelief2D.from_components(
            float(self.position_mean[0]), float(self.position_mean[1]),
            max(self.diameter_mean, MIN_DIAMETER),
            self.position_cov, self.diameter_var)

    def copy(self) -> "LandmarkEstimate":
        return LandmarkEstimate(self.id, self.position_mean.copy(),
                                self.position_cov.copy(), self.diameter_mean,
                                self.diameter_var, self.num_updates)


def simulate_detections(world, pose: Pose2, params: SensorParams, rng
                        ) -> list[tuple[Detection, int]]:
    """Noisy detections of all visible obstacles.

    `world` is a list of ((x, y), diameter) ground-truth obstacles (any
    object exposing those as `o[0]` and `o[1]`, Point2 accepted for o[0]).
    An obstacle is visible when its center is within max_range, within the
    half field of view, and the robot-to-center sight line is not blocked
    by any other obstacle disc. Returns (detection, truth_index) pairs;
    the truth index is for evaluation only and must never reach a planner.
    """
    out = []
    centers = []
    radii = []
    for center, diameter in world:
        cx = center.x if isinstance(center, Point2) else center[0]
        cy = center.y if isinstance(center, Point2) else center[1]
        centers.append((cx, cy))
        radii.append(diameter / 2.0)

    for idx, (center, diameter) in enumerate(world):
        cx, cy = centers[idx]
        dx, dy = cx - pose.x, cy - pose.y
        true_range = math.hypot(dx, dy)
        if true_range <= 0.0 or true_range > params.max_range:
            continue
        true_bearing = normalize_angle(math.atan2(dy, dx) - pose.theta)
        if abs(true_bearing) > params.fov / 2.0:
            continue
        occluded = False
        for other, (ox, oy) in enumerate(centers):
            if other == idx:
                continue
            if point_segment_distance(ox, oy, pose.x, pose.y, cx, cy) < radii[other]:
                occluded = True
                break
        if occluded:
            continue
        sd_r = params.sigma_r(true_range)
        sd_d = params.sigma_d(true_range, diameter)
        z_r = true_range + sd_r * rng.standard_normal()
        z_b = true_bearing + params.sigma_phi * rng.standard_normal()
        z_d = diameter + sd_d * rng.standard_normal()
        out.append((Detection(max(z_r, 1e-6), z_b, max(z_d, MIN_DIAMETER)), idx))
    return out


def range_bearing_jacobian(pose_xy: np.ndarray, landmark_xy: np.ndarray) -> np.ndarray:
    """Jacobian of (range, bearing) with respect to the landmark position."""
    dx = landmark_xy[0] - pose_xy[0]
    dy = landmark_xy[1] - pose_xy[1]
    d2 = dx * dx + dy * dy
    d = math.sqrt(d2)
    return np.array([[dx / d, dy / d],
                     [-dy / d2, dx / d2]])


def predicted_measurement(pose: Pose2, landmark_xy: np.ndarray) -> tuple[float, float]:
    dx = landmark_xy[0] - pose.x
    dy = landmark_xy[1] - pose.y
    return math.hypot(dx, dy), normalize_angle(math.atan2(dy, dx) - pose.theta)


def associate(detections: list[Detection], estimates: list[LandmarkEstimate],
              pose: Pose2, params: SensorParams,
              gate: float = DEFAULT_GATE) -> list[int | None]:
    """Greedy one-to-one assignment of detections to landmark estimates.

    Returns, per detection, the matched landmark id or None for a new
    landmark. Pairs are taken in increasing Mahalanobis distance order,
    computed in range-bearing space (landmark position covariance projected
    through the measurement Jacobian plus measurement noise); pairs whose
    squared distance exceeds the gate are never matched.
    """
    n_det = len(detections)
    assignment: list[int | None] = [None] * n_det
    if n_det == 0 or not estimates:
        return assignment

    pose_xy = np.array([pose.x, pose.y])
    predictions = [predicted_measurement(pose, est.position_mean) for est in estimates]
    jacobians = [range_bearing_jacobian(pose_xy, est.position_mean) for est in estimates]

    candidates = []
    for d_idx, det in enumerate(detections):
        meas_noise = np.diag([params.sigma_r(det.range) ** 2, params.sigma_phi ** 2])
        for e_idx, est in enumerate(estimates):
            pred_r, pred_b = predictions[e_idx]
            innov = np.array([det.range - pred_r,
                              normalize_angle(det.bearing - pred_b)])
            jac = jacobians[e_idx]
            s = jac @ est.position_cov @ jac.T + meas_noise
            try:
                d2 = float(innov @ np.linalg.solve(s, innov))
            except np.linalg.LinAlgError:
                continue
            if d2 <= gate:
                candidates.append((d2, d_idx, e_idx))

    candidates.sort()
    used_detections: set[int] = set()
    used_estimates: set[int] = set()
    for d2, d_idx, e_idx in candidates:
        if d_idx in used_detections or e_idx in used_estimates:
            continue
        assignment[d_idx] = estimates[e_idx].id
        used_detections.add(d_idx)
        used_estimates.add(e_idx)
    return assignment


def _initialize_landmark(new_id: int, det: Detection, pose: Pose2,
                         params: SensorParams) -> LandmarkEstimate:
    angle = pose.theta + det.bearing
    x = pose.x + det.range * math.cos(angle)
    y = pose.y + det.range * math.sin(angle)
    # Linearized transform of (range, bearing) noise into the plane.
    g = np.array([[math.cos(angle), -det.range * math.sin(angle)],
                  [math.sin(angle), det.range * math.cos(angle)]])
    noise = np.diag([params.sigma_r(det.range) ** 2, params.sigma_phi ** 2])
    cov = g @ noise @ g.T
    cov = 0.5 * (cov + cov.T) + 1e-12 * np.eye(2)
    d_var = params.sigma_d(det.range, det.diameter) ** 2
    return LandmarkEstimate(new_id, np.array([x, y]), cov,
                            max(det.diameter, MIN_DIAMETER), d_var, num_updates=1)


def _ekf_update(est: LandmarkEstimate, det: Detection, pose: Pose2,
                params: SensorParams) -> LandmarkEstimate:
    pose_xy = np.array([pose.x, pose.y])
    pred_r, pred_b = predicted_measurement(pose, est.position_mean)
    innov = np.array([det.range - pred_r, normalize_angle(det.bearing - pred_b)])
    h = range_bearing_jacobian(pose_xy, est.position_mean)
    r = np.diag([params.sigma_r(det.range) ** 2, params.sigma_phi ** 2])
    p = est.position_cov
    s = h @ p @ h.T + r
    k = p @ h.T @ np.linalg.inv(s)
    mean = est.position_mean + k @ innov
    # Joseph form keeps the covariance symmetric positive definite.
    ikh = np.eye(2) - k @ h
    cov = ikh @ p @ ikh.T + k @ r @ k.T
    cov = 0.5 * (cov + cov.T)

    sd_d = params.sigma_d(det.range, det.diameter)
    gain = est.diameter_var / (est.diameter_var + sd_d ** 2)
    d_mean = est.diameter_mean + gain * (det.diameter - est.diameter_mean)
    d_var = (1.0 - gain) * est.diameter_var
    return LandmarkEstimate(est.id, mean, cov, max(d_mean, MIN_DIAMETER),
                            d_var, est.num_updates + 1)


def update_landmarks(estimates: list[LandmarkEstimate],
                     assignment: list[int | None],
                     detections: list[Detection], pose: Pose2,
                     params: SensorParams) -> list[LandmarkEstimate]:
    """Apply one measurement batch; returns a new list of estimates.

    Matched landmarks receive an EKF position update plus a scalar Kalman
    diameter update; unmatched detections initialize new landmarks at the
    back-projected position.
    """
    by_id = {est.id: est for est in estimates}
    next_id = max(by_id, default=-1) + 1
    for det, lm_id in zip(detections, assignment):
        if lm_id is None:
            by_id[next_id] = _initialize_landmark(next_id, det, pose, params)
            next_id += 1
        else:
            by_id[lm_id] = _ekf_update(by_id[lm_id], det, pose, params)
    return [by_id[k] for k in sorted(by_id)]

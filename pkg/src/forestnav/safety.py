"""
Probability that a robot of known width fits between two circular obstacles
whose positions and diameters are Gaussian estimates.

The 1D case treats the free gap between the obstacles' facing edges as a
linear combination of Gaussians; the passage probability is the Gaussian
tail beyond the robot width. The 2D case rotates both position beliefs
into the frame whose x-axis joins the two mean centers, marginalizes out
the transformed y-axis, and reuses the 1D result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CoincidentObstaclesError(ValueError):
    """Obstacle means too close to define a passage direction."""


@dataclass(frozen=True)
class GaussianScalar:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")


@dataclass(frozen=True)
class FreeSpaceBelief:
    """Gaussian belief over the width of the gap between two obstacles."""

    mu: float
    var: float

    def __post_init__(self):
        if self.var < 0.0:
            raise ValueError(f"var must be >= 0, got {self.var}")


@dataclass
class ObstacleBelief2D:
    """Gaussian belief over a circular obstacle's 2D position and diameter.

    `mean` is (x, y, diameter); `covariance` is the 3x3 matrix whose upper
    left 2x2 block is the position covariance and whose (2, 2) entry is the
    diameter variance. Position-diameter cross terms are zero: position and
    size are estimated by decoupled filters.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.covariance = np.asarray(self.covariance, dtype=float)
        if self.mean.shape != (3,):
            raise ValueError(f"mean must have shape (3,), got {self.mean.shape}")
        if self.covariance.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got {self.covariance.shape}")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if self.mean[2] <= 0.0:
            raise ValueError(f"diameter mean must be > 0, got {self.mean[2]}")
        if (abs(self.covariance[0, 2]) > 1e-12 or abs(self.covariance[1, 2]) > 1e-12):
            raise ValueError("position-diameter cross covariance must be zero")

    @property
    def position_mean(self) -> np.ndarray:
        return self.mean[:2]

    @property
    def position_cov(self) -> np.ndarray:
        return self.covariance[:2, :2]

    @property
    def diameter(self) -> GaussianScalar:
        return GaussianScalar(float(self.mean[2]), float(self.covariance[2, 2]))

    @property
    def radius(self) -> GaussianScalar:
        # r = d/2 is a linear transform of the Gaussian diameter estimate.
        return GaussianScalar(float(self.mean[2]) / 2.0, float(self.covariance[2, 2]) / 4.0)

    @staticmethod
    def from_components(x: float, y: float, diameter: float,
                        position_cov: np.ndarray, diameter_var: float) -> "ObstacleBelief2D":
        cov = np.zeros((3, 3))
        cov[:2, :2] = position_cov
        cov[2, 2] = diameter_var
        return ObstacleBelief2D(np.array([x, y, diameter]), cov)


def free_space_1d(obs_i: tuple[GaussianScalar, GaussianScalar],
                  obs_j: tuple[GaussianScalar, GaussianScalar]) -> FreeSpaceBelief:
    """Gaussian belief over the 1D gap between two (position, radius) pairs.

    The obstacle with the smaller position mean plays the left role; the
    result is symmetric in the argument order.
    """
    (pos_i, rad_i), (pos_j, rad_j) = obs_i, obs_j
    if pos_i.mean > pos_j.mean:
        pos_i, rad_i, pos_j, rad_j = pos_j, rad_j, pos_i, rad_i
    mu = (pos_j.mean - rad_j.mean) - (pos_i.mean + rad_i.mean)
    var = pos_i.variance + rad_i.variance + pos_j.variance + rad_j.variance
    return FreeSpaceBelief(mu, var)


def safe_passage_probability_1d(space: FreeSpaceBelief, robot_width: float) -> float:
    """P(gap > robot_width) for a Gaussian gap belief.

    Equals one minus the Gaussian CDF at the robot width. A zero-variance
    belief degenerates to a step function (0.5 exactly at the width).
    """
    if robot_width <= 0.0:
        raise ValueError(f"robot_width must be > 0, got {robot_width}")
    if space.var == 0.0:
        if space.mu > robot_width:
            return 1.0
        if space.mu == robot_width:
            return 0.5
        return 0.0
    z = (robot_width - space.mu) / math.sqrt(space.var)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def safe_passage_probability_2d(obs_i: ObstacleBelief2D, obs_j: ObstacleBelief2D,
                                robot_width: float) -> float:
    """P(the robot fits between two 2D circular obstacle beliefs).

    Rotates both position beliefs so the mean centers lie on the new x-axis,
    marginalizes over the transformed y-axis, and applies the 1D model to
    the transformed x-components plus the radius beliefs.
    """
    dx = float(obs_j.mean[0] - obs_i.mean[0])
    dy = float(obs_j.mean[1] - obs_i.mean[1])
    if math.hypot(dx, dy) <= 1e-9:
        raise CoincidentObstaclesError(
            "obstacle means coincide; no passage direction defined")
    theta = math.atan2(dy, dx)
    c, s = math.cos(theta), math.sin(theta)

    # Transformed x-component of the mean: first row of R @ mu with
    # R = [[c, s], [-s, c]] (rotation by -theta).
    def x_component(belief: ObstacleBelief2D) -> GaussianScalar:
        mx, my = belief.position_mean
        cov = belief.position_cov
        mean_x = c * mx + s * my
        var_x = (c * c * cov[0, 0] + 2.0 * c * s * cov[0, 1] + s * s * cov[1, 1])
        return GaussianScalar(mean_x, max(0.0, float(var_x)))

    space = free_space_1d((x_component(obs_i), obs_i.radius),
                          (x_component(obs_j), obs_j.radius))
    return safe_passage_probability_1d(space, robot_width)

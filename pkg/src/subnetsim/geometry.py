"""Deployment and mobility of subnetworks on the factory floor.

Each subnetwork is an access point with one sensor and one actuator mounted
on the same machine; the three move rigidly. Centers follow a restricted
random waypoint model: waypoints are drawn uniformly from the square inset
by the subnetwork radius, travel is a straight line at constant speed, and
a fresh waypoint is drawn on arrival with zero pause time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Deployment", "init_deployment", "step_mobility", "simulate_trajectory"]


@dataclass
class Deployment:
    area_side: float
    radius: float
    speed: float
    centers: np.ndarray
    sensor_offsets: np.ndarray
    actuator_offsets: np.ndarray
    waypoints: np.ndarray = field(init=False)

    def __post_init__(self):
        self.waypoints = self.centers.copy()

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    @property
    def ap_xy(self) -> np.ndarray:
        return self.centers

    @property
    def sensor_xy(self) -> np.ndarray:
        return self.centers + self.sensor_offsets

    @property
    def actuator_xy(self) -> np.ndarray:
        return self.centers + self.actuator_offsets


def _uniform_in_inset(n: int, side: float, margin: float, rng) -> np.ndarray:
    return rng.uniform(margin, side - margin, (n, 2))


def _uniform_annulus(n: int, r_min: float, r_max: float, rng) -> np.ndarray:
    # area-uniform radius: r = sqrt(U*(r_max^2 - r_min^2) + r_min^2)
    r = np.sqrt(rng.uniform(r_min**2, r_max**2, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def init_deployment(
    n: int,
    rng: np.random.Generator,
    area_side: float = 30.0,
    radius: float = 2.0,
    sensor_min_dist: float = 1.0,
    speed: float = 3.0,
) -> Deployment:
    """Place n subnetworks: centers uniform in the inset square, sensor
    uniform on the annulus [sensor_min_dist, radius] around the AP,
    actuator uniform on the disc of the subnetwork radius."""
    centers = _uniform_in_inset(n, area_side, radius, rng)
    sensor_offsets = _uniform_annulus(n, sensor_min_dist, radius, rng)
    actuator_offsets = _uniform_annulus(n, 0.0, radius, rng)
    dep = Deployment(area_side, radius, speed, centers, sensor_offsets, actuator_offsets)
    dep.waypoints = _uniform_in_inset(n, area_side, radius, rng)
    return dep


def step_mobility(dep: Deployment, dt: float, rng: np.random.Generator) -> None:
    """Move every center toward its waypoint by speed*dt; redraw waypoints
    that are reached within this step's travel."""
    delta = dep.waypoints - dep.centers
    dist = np.hypot(delta[:, 0], delta[:, 1])
    travel = dep.speed * dt
    arrive = dist <= travel
    go = ~arrive
    if go.any():
        dep.centers[go] += delta[go] * (travel / dist[go])[:, None]
    if arrive.any():
        dep.centers[arrive] = dep.waypoints[arrive]
        dep.waypoints[arrive] = _uniform_in_inset(
            int(arrive.sum()), dep.area_side, dep.radius, rng
        )


def simulate_trajectory(
    dep: Deployment, frames: int, dt: float, rng: np.random.Generator
) -> np.ndarray:
    """Advance the deployment by `frames` mobility steps, returning the
    center positions after each step, shape (frames, n, 2)."""
    out = np.empty((frames, dep.n, 2))
    for t in range(frames):
        step_mobility(dep, dt, rng)
        out[t] = dep.centers
    return out

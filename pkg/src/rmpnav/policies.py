"""The policy zoo: goal attractor, per-ray obstacle policy, single-lookup
field policy, raycast bundle policy, and range-scan policy.

The obstacle policy sums a distance-decaying repulsor with a velocity-squared
damper and weights itself with a rank-one metric stretched toward the
obstacle, scaled by a quadratic falloff that reaches zero at the activation
radius. Rays pointing away from the robot's motion therefore carry a zero
metric and drop out of the combination entirely.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ._kernels import get_backend
from .core import Policy, RobotState, pinv_psd, soft_normalize
from .geometry import EsdfGrid, esdf_lookup
from .rays import DEFAULT_MAX_RANGE, RangeScan, RayBundle, raycast_many

__all__ = [
    "AttractorParams",
    "ObstacleParams",
    "PolicyParams",
    "PRESETS",
    "preset",
    "attractor",
    "obstacle_ray_policy",
    "activation_weight",
    "esdf_policy",
    "ray_policy",
    "lidar_policy",
    "save_params",
    "load_params",
]

DEFAULT_LIDAR_MIN_RANGE = 0.3


@dataclass(frozen=True)
class AttractorParams:
    """Goal attractor gains: pull strength, velocity damping, and the
    soft-normalization sharpness."""

    alpha: float
    beta: float
    c: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.c <= 0:
            raise ValueError("attractor parameters must be positive")


@dataclass(frozen=True)
class ObstacleParams:
    """Obstacle policy tuning.

    ``eta_rep``/``nu_rep`` scale the repulsor gain and its decay length,
    ``eta_damp``/``nu_damp`` the damper, ``epsilon`` keeps the damper finite
    at contact, ``radius`` is the activation radius beyond which the metric
    is exactly zero, and ``c`` the soft-normalization sharpness.
    """

    eta_rep: float
    nu_rep: float
    eta_damp: float
    nu_damp: float
    radius: float
    c: float
    epsilon: float = 1e-6

    def __post_init__(self):
        vals = (self.eta_rep, self.nu_rep, self.eta_damp, self.nu_damp,
                self.radius, self.c, self.epsilon)
        if any(v <= 0 for v in vals):
            raise ValueError("obstacle parameters must be positive")

    def as_tuple(self) -> tuple:
        """Kernel argument order."""
        return (self.eta_rep, self.nu_rep, self.eta_damp, self.nu_damp,
                self.epsilon, self.radius, self.c)


@dataclass(frozen=True)
class PolicyParams:
    attractor: AttractorParams
    obstacle: ObstacleParams


PRESETS: dict[str, PolicyParams] = {
    "static_map": PolicyParams(
        AttractorParams(alpha=10.0, beta=15.0, c=0.2),
        ObstacleParams(eta_rep=88.0, nu_rep=1.4, eta_damp=140.0, nu_damp=1.2,
                       radius=2.4, c=0.2),
    ),
    "lidar": PolicyParams(
        AttractorParams(alpha=0.8, beta=1.6, c=1.0),
        ObstacleParams(eta_rep=1.2, nu_rep=1.5, eta_damp=3.0, nu_damp=1.0,
                       radius=1.3, c=1.0),
    ),
}


def preset(name: str) -> PolicyParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def save_params(params: PolicyParams, path) -> None:
    doc = {"attractor": asdict(params.attractor), "obstacle": asdict(params.obstacle)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_params(path) -> PolicyParams:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return PolicyParams(AttractorParams(**doc["attractor"]),
                        ObstacleParams(**doc["obstacle"]))


def attractor(state: RobotState, goal, p: AttractorParams) -> Policy:
    """Pull toward the goal with saturating strength, damped by velocity;
    identity metric."""
    goal = np.asarray(goal, dtype=float).reshape(3)
    f = p.alpha * soft_normalize(goal - state.position, p.c) - p.beta * state.velocity
    return Policy(f, np.eye(3))


def activation_weight(d: float, radius: float) -> float:
    """Quadratic falloff from 1 at contact to exactly 0 at the activation
    radius (and beyond)."""
    if d >= radius:
        return 0.0
    return d * d / (radius * radius) - 2.0 * d / radius + 1.0


def obstacle_ray_policy(velocity, away_dir, distance: float,
                        p: ObstacleParams) -> Policy:
    """Obstacle policy for one sensed surface point.

    ``away_dir`` is the unit vector pointing away from the obstacle. The
    repulsor pushes along it with exponentially decaying gain; the damper
    brakes the velocity component heading into the obstacle, growing as the
    distance shrinks. The metric is the outer product of the soft-normalized
    damper, weighted by the activation falloff, so it is rank one and aligned
    with the obstacle direction.
    """
    v = np.asarray(velocity, dtype=float).reshape(3)
    r = np.asarray(away_dir, dtype=float).reshape(3)
    d = float(distance)
    f_rep = p.eta_rep * np.exp(-d / p.nu_rep) * r
    toward = max(0.0, -float(v @ r))
    g = toward * toward * r
    f_damp = p.eta_damp / (d / p.nu_damp + p.epsilon) * g
    s = soft_normalize(f_damp, p.c)
    metric = activation_weight(d, p.radius) * np.outer(s, s)
    return Policy(f_rep + f_damp, metric)


def esdf_policy(state: RobotState, grid: EsdfGrid, p: ObstacleParams) -> Policy:
    """Single-lookup obstacle policy: one distance/gradient query feeds one
    obstacle policy. Degenerate (zero) gradients yield a zero-metric policy."""
    sample = esdf_lookup(grid, state.position)
    if sample.degenerate:
        return Policy.zero()
    return obstacle_ray_policy(state.velocity, sample.gradient, sample.distance, p)


def _reduced_policy(be, dirs, dists, velocity, p: ObstacleParams,
                    min_range: float, workers: int) -> Policy:
    metric, weighted, _hits = be.policy_reduce(dirs, dists, velocity,
                                               p.as_tuple(), min_range, workers)
    return Policy(pinv_psd(metric) @ weighted, metric)


def ray_policy(state: RobotState, field, bundle: RayBundle, p: ObstacleParams,
               max_range: float = DEFAULT_MAX_RANGE, t: float = 0.0,
               workers: int = 1, backend: str | None = None) -> Policy:
    """Cast the bundle from the robot and combine one obstacle policy per
    hit ray (the away direction is the negated cast direction). Misses
    contribute nothing; no hits yield the zero policy."""
    be = get_backend(backend)
    dists = raycast_many(field, state.position, bundle.directions, max_range,
                         t, workers=workers, backend=backend)
    return _reduced_policy(be, bundle.directions, dists, state.velocity, p,
                           0.0, workers)


def lidar_policy(velocity, scan: RangeScan, p: ObstacleParams,
                 min_range: float = DEFAULT_LIDAR_MIN_RANGE,
                 workers: int = 1, backend: str | None = None) -> Policy:
    """Same reduction as the ray bundle policy, but with directions and
    ranges taken verbatim from a scan in the world frame. Invalid beams and
    beams closer than ``min_range`` (self-returns) are skipped."""
    be = get_backend(backend)
    dirs = np.ascontiguousarray(scan.world_directions())
    dists = np.where(scan.valid, scan.ranges, np.inf)
    return _reduced_policy(be, dirs, dists, np.asarray(velocity, dtype=float),
                           p, min_range, workers)

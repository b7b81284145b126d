"""Reactive navigation with metric-weighted motion policies.

Thousands of quasi-random rays are cast from the robot through a voxel
signed-distance map (or taken verbatim from a LiDAR scan); every hit spawns a
small repulsor-plus-damper policy with a directional metric, and a tree
reduction merges them with a goal attractor into one acceleration command.
Hot kernels run in a compiled extension when available, with a pure-NumPy
fallback selected at import.
"""

__version__ = "0.1.0"

from ._kernels import (available_backends, default_backend_name, get_backend,
                       set_default_backend)
from .core import Policy, RobotState, combine, soft_normalize
from .geometry import (Aabb, EsdfGrid, Primitive, Scene, bake_esdf,
                       esdf_lookup, generate_world, load_esdf, load_scene,
                       occupied_fraction, save_esdf, save_scene,
                       scene_distance)
from .policies import (PRESETS, AttractorParams, ObstacleParams, PolicyParams,
                       attractor, esdf_policy, lidar_policy,
                       obstacle_ray_policy, preset, ray_policy)
from .rays import (RangeScan, RayBundle, halton, raycast, raycast_many,
                      sample_directions, synthesize_scan)
from .sim import (Outcome, PlannerSpec, RolloutConfig, TrajectoryRecord,
                  evaluate_batch, rollout, smoothness, step)

__all__ = [
    "__version__",
    "available_backends", "default_backend_name", "get_backend", "set_default_backend",
    "Policy", "RobotState", "combine", "soft_normalize",
    "Aabb", "EsdfGrid", "Primitive", "Scene", "bake_esdf", "esdf_lookup",
    "generate_world", "load_esdf", "load_scene", "occupied_fraction",
    "save_esdf", "save_scene", "scene_distance",
    "PRESETS", "AttractorParams", "ObstacleParams", "PolicyParams",
    "attractor", "esdf_policy", "lidar_policy", "obstacle_ray_policy",
    "preset", "ray_policy",
    "RangeScan", "RayBundle", "halton", "raycast", "raycast_many",
    "sample_directions", "synthesize_scan",
    "Outcome", "PlannerSpec", "RolloutConfig", "TrajectoryRecord",
    "evaluate_batch", "rollout", "smoothness", "step",
]

"""Throughput benchmarking of policy evaluation.

Times the full evaluate-reduce-return cycle of the bundle and scan policies
over a fixed set of robot states (cycled to defeat caching artifacts), after
warm-up, with map construction and scan synthesis excluded from the measured
region. Reports medians and p95s; the rate is 1 / mean latency.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from ._kernels import default_backend_name
from .core import RobotState
from .geometry import EsdfGrid, Scene, bake_esdf, generate_world, scene_distance
from .policies import ObstacleParams, lidar_policy, preset, ray_policy
from .rays import DEFAULT_MAX_RANGE, sample_directions, synthesize_scan

__all__ = [
    "BenchRow",
    "bench_policy",
    "bench_scan_policy",
    "bench_states",
    "standard_bench_world",
    "write_bench_csv",
    "BENCH_CSV_COLUMNS",
]

BENCH_CSV_COLUMNS = ["planner", "rays", "workers", "reps", "median_us",
                     "p95_us", "hz", "per_ray_ns", "backend"]

DEFAULT_RAY_SWEEP = [4**2, 8**2, 16**2, 32**2, 64**2, 128**2, 256**2]


@dataclass
class BenchRow:
    planner: str
    rays: int
    workers: int
    reps: int
    median_us: float
    p95_us: float
    hz: float
    per_ray_ns: float
    backend: str


def standard_bench_world(seed: int = 7, n_obstacles: int = 100,
                         resolution: float = 0.2, pad: float = 2.0):
    """A reproducible cluttered world plus its baked grid for benchmarking."""
    scene, start, goal = generate_world(seed, n_obstacles)
    grid = bake_esdf(scene, resolution, pad=pad)
    return scene, grid, start, goal


def bench_states(scene: Scene, count: int = 10, seed: int = 123,
                 clearance: float = 0.4, speed: float = 1.0) -> list[RobotState]:
    """Deterministic free-space robot states with nonzero velocities."""
    rng = np.random.default_rng(seed)
    states = []
    while len(states) < count:
        x = rng.uniform(scene.bounds.lo, scene.bounds.hi)
        if scene_distance(scene, x) <= clearance:
            continue
        v = rng.normal(size=3)
        v *= speed / np.linalg.norm(v)
        states.append(RobotState(x, v))
    return states


def _timed(fn, reps: int, warmup: int):
    for _ in range(warmup):
        fn(0)
    lat = np.empty(reps)
    for r in range(reps):
        t0 = time.perf_counter()
        fn(r)
        lat[r] = time.perf_counter() - t0
    return lat


def bench_policy(field, n_rays: int, workers: int = 1, repetitions: int = 100,
                 warmup: int = 10, params: ObstacleParams | None = None,
                 states: list[RobotState] | None = None, scene: Scene | None = None,
                 max_range: float = DEFAULT_MAX_RANGE,
                 backend: str | None = None) -> BenchRow:
    """Latency of the full bundle-policy evaluation at a fixed ray count."""
    if params is None:
        params = preset("static_map").obstacle
    if states is None:
        if scene is None and isinstance(field, Scene):
            scene = field
        if scene is None:
            raise ValueError("bench_policy needs states or a scene to sample them from")
        states = bench_states(scene)
    bundle = sample_directions(n_rays)

    def run(r):
        st = states[r % len(states)]
        ray_policy(st, field, bundle, params, max_range, workers=workers,
                   backend=backend)

    lat = _timed(run, repetitions, warmup)
    med = float(np.median(lat) * 1e6)
    return BenchRow(
        planner="ray", rays=n_rays, workers=workers, reps=repetitions,
        median_us=med, p95_us=float(np.percentile(lat, 95) * 1e6),
        hz=float(1.0 / lat.mean()), per_ray_ns=med * 1000.0 / n_rays,
        backend=backend or default_backend_name(),
    )


def bench_scan_policy(scene: Scene, rows: int, cols: int, workers: int = 1,
                      repetitions: int = 100, warmup: int = 10,
                      params: ObstacleParams | None = None,
                      states: list[RobotState] | None = None,
                      max_range: float = DEFAULT_MAX_RANGE,
                      backend: str | None = None) -> BenchRow:
    """Latency of the scan-policy reduction on pre-synthesized scans
    (synthesis excluded from the timed region)."""
    if params is None:
        params = preset("lidar").obstacle
    if states is None:
        states = bench_states(scene)
    scans = [synthesize_scan(scene, st.position, rows, cols, max_range,
                             backend=backend) for st in states]

    def run(r):
        i = r % len(states)
        lidar_policy(states[i].velocity, scans[i], params, workers=workers,
                     backend=backend)

    lat = _timed(run, repetitions, warmup)
    n = rows * cols
    med = float(np.median(lat) * 1e6)
    return BenchRow(
        planner="scan", rays=n, workers=workers, reps=repetitions,
        median_us=med, p95_us=float(np.percentile(lat, 95) * 1e6),
        hz=float(1.0 / lat.mean()), per_ray_ns=med * 1000.0 / n,
        backend=backend or default_backend_name(),
    )


def write_bench_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_CSV_COLUMNS)
        for r in rows:
            w.writerow([r.planner, r.rays, r.workers, r.reps,
                        f"{r.median_us:.2f}", f"{r.p95_us:.2f}",
                        f"{r.hz:.2f}", f"{r.per_ray_ns:.2f}", r.backend])


def format_bench_table(rows: list[BenchRow]) -> str:
    head = f"{'planner':>8} {'rays':>7} {'wrk':>4} {'median_us':>10} {'p95_us':>10} {'hz':>9} {'ns/ray':>8} {'backend':>9}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.planner:>8} {r.rays:>7} {r.workers:>4} "
                     f"{r.median_us:>10.1f} {r.p95_us:>10.1f} {r.hz:>9.1f} "
                     f"{r.per_ray_ns:>8.1f} {r.backend:>9}")
    return "\n".join(lines)

"""Closed-loop rollouts of a policy-driven point robot, trajectory metrics,
and batch evaluation over randomized worlds.

The robot is a double integrator stepped with semi-implicit Euler at a fixed
control rate; at every step the goal attractor and the configured obstacle
policy are combined and the resulting acceleration applied. Rollouts are
strictly sequential in time; batches parallelize across rollouts only.
"""

from __future__ import annotations

import csv
import enum
import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Policy, RobotState, combine
from .geometry import (Aabb, EsdfGrid, Scene, WorldGenError, bake_esdf,
                       generate_world, scene_distance)
from .policies import (PolicyParams, attractor, esdf_policy, lidar_policy,
                       ray_policy, DEFAULT_LIDAR_MIN_RANGE)
from .rays import DEFAULT_MAX_RANGE, DEFAULT_VFOV_DEG, sample_directions, synthesize_scan

__all__ = [
    "Outcome",
    "PlannerSpec",
    "RolloutConfig",
    "TrajectoryRecord",
    "BatchRow",
    "BatchResult",
    "step",
    "rollout",
    "smoothness",
    "path_length",
    "evaluate_batch",
    "save_trajectory",
    "write_batch_csv",
    "BATCH_CSV_COLUMNS",
]

logger = logging.getLogger("rmpnav.sim")

MIN_SEGMENT_LEN = 1e-6


class Outcome(enum.Enum):
    SUCCESS = "SUCCESS"
    COLLISION = "COLLISION"
    TIMEOUT = "TIMEOUT"
    STUCK = "STUCK"


@dataclass(frozen=True)
class PlannerSpec:
    """Which obstacle policy drives the rollout: ``ray:N`` (N rays, ``ray:32^2``
    also accepted), ``esdf``, or ``lidar:ROWSxCOLS``."""

    kind: str
    n_rays: int = 0
    rows: int = 0
    cols: int = 0

    def __post_init__(self):
        if self.kind not in ("ray", "esdf", "lidar"):
            raise ValueError(f"unknown planner kind {self.kind!r}")
        if self.kind == "ray" and self.n_rays < 1:
            raise ValueError("ray planner needs n_rays >= 1")
        if self.kind == "lidar" and (self.rows < 1 or self.cols < 1):
            raise ValueError("lidar planner needs rows, cols >= 1")

    @staticmethod
    def parse(text: str) -> "PlannerSpec":
        text = text.strip()
        if text == "esdf":
            return PlannerSpec("esdf")
        if text.startswith("ray:"):
            arg = text[4:]
            if "^" in arg:
                base, _, expo = arg.partition("^")
                n = int(base) ** int(expo)
            else:
                n = int(arg)
            return PlannerSpec("ray", n_rays=n)
        if text.startswith("lidar:"):
            rows, _, cols = text[6:].partition("x")
            return PlannerSpec("lidar", rows=int(rows), cols=int(cols))
        raise ValueError(f"cannot parse planner spec {text!r}")

    def label(self) -> str:
        if self.kind == "ray":
            return f"ray:{self.n_rays}"
        if self.kind == "lidar":
            return f"lidar:{self.rows}x{self.cols}"
        return "esdf"


@dataclass(frozen=True)
class RolloutConfig:
    """Everything a rollout needs besides the world and endpoints.

    ``hold_mode`` keeps the attractor pinned on the goal without terminating
    on arrival (and disables the stuck check): surviving to ``max_time``
    counts as success. Used for station-keeping scenarios with moving
    obstacles.
    """

    planner: PlannerSpec
    params: PolicyParams
    dt: float = 0.01
    max_time: float = 60.0
    robot_radius: float = 0.3
    goal_tolerance: float = 0.3
    max_accel: float = 40.0
    stuck_window: float = 2.0
    stuck_speed: float = 0.01
    grid_resolution: float = 0.2
    grid_pad: float = 2.0
    max_range: float = DEFAULT_MAX_RANGE
    lidar_min_range: float = DEFAULT_LIDAR_MIN_RANGE
    vfov_deg: float = DEFAULT_VFOV_DEG
    hold_mode: bool = False
    workers: int = 1
    backend: str | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.robot_radius < 0:
            raise ValueError("robot_radius must be >= 0")


@dataclass
class TrajectoryRecord:
    """Time-stamped states, commands, and per-step planning time of one
    rollout."""

    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accels: np.ndarray
    plan_time_us: np.ndarray
    outcome: Outcome
    n_clamped: int = 0
    wall_time_s: float = 0.0

    def __len__(self) -> int:
        return self.t.shape[0]


def step(state: RobotState, accel, dt: float) -> RobotState:
    """Semi-implicit double-integrator step: velocity first, then position
    with the updated velocity."""
    a = np.asarray(accel, dtype=float).reshape(3)
    v = state.velocity + a * dt
    x = state.position + v * dt
    return RobotState(x, v)


def smoothness(traj) -> float | None:
    """Mean angular similarity of consecutive trajectory segments: 1 is
    perfectly straight, 0.5 an average quarter turn per segment. Segments
    shorter than 1e-6 m are skipped; returns None with fewer than two usable
    segments."""
    pts = traj.positions if isinstance(traj, TrajectoryRecord) else np.asarray(traj, dtype=float)
    segs = np.diff(pts, axis=0)
    lens = np.linalg.norm(segs, axis=1)
    segs = segs[lens >= MIN_SEGMENT_LEN]
    lens = lens[lens >= MIN_SEGMENT_LEN]
    if segs.shape[0] < 2:
        return None
    cosang = np.einsum("ij,ij->i", segs[:-1], segs[1:]) / (lens[:-1] * lens[1:])
    cosang = np.clip(cosang, -1.0, 1.0)
    return float(np.mean(1.0 - np.arccos(cosang) / np.pi))


def path_length(traj) -> float:
    pts = traj.positions if isinstance(traj, TrajectoryRecord) else np.asarray(traj, dtype=float)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def _make_field(scene: Scene, cfg: RolloutConfig, grid: EsdfGrid | None):
    """Grid planners trace the baked map for static scenes and fall back to
    the analytic scene when primitives move."""
    if grid is not None:
        return grid
    if cfg.planner.kind == "ray" and scene.is_dynamic:
        return scene
    return bake_esdf(scene, cfg.grid_resolution, pad=cfg.grid_pad)


def rollout(scene: Scene, start, goal, cfg: RolloutConfig,
            grid: EsdfGrid | None = None) -> TrajectoryRecord:
    """Drive the robot from start toward goal under the configured planner.

    Terminates with SUCCESS inside the goal tolerance, COLLISION when the
    scene distance falls to the robot radius, TIMEOUT at max_time, or STUCK
    when the mean speed over the stuck window collapses while away from the
    goal. Moving primitives advance with simulation time. A prebaked ``grid``
    may be supplied to share map construction across rollouts.
    """
    start = np.asarray(start, dtype=float).reshape(3)
    goal = np.asarray(goal, dtype=float).reshape(3)
    if scene_distance(scene, start, 0.0) <= cfg.robot_radius:
        raise ValueError("start point lacks clearance above the robot radius")
    if scene_distance(scene, goal, 0.0) <= cfg.robot_radius:
        raise ValueError("goal point lacks clearance above the robot radius")

    planner = cfg.planner
    field_obj = None
    bundle = None
    if planner.kind in ("ray", "esdf"):
        field_obj = _make_field(scene, cfg, grid)
        if planner.kind == "esdf" and not isinstance(field_obj, EsdfGrid):
            raise ValueError("esdf planner requires a baked grid")
        if planner.kind == "ray":
            bundle = sample_directions(planner.n_rays)

    ap, op = cfg.params.attractor, cfg.params.obstacle
    state = RobotState(start, np.zeros(3))
    window = max(1, int(round(cfg.stuck_window / cfg.dt)))
    speeds: deque = deque(maxlen=window)
    max_steps = int(round(cfg.max_time / cfg.dt))

    ts, xs, vs, accs, pticks = [], [], [], [], []
    n_clamped = 0
    outcome = None
    wall_start = time.perf_counter()

    k = 0
    while True:
        t = k * cfg.dt
        if scene_distance(scene, state.position, t) <= cfg.robot_radius:
            outcome = Outcome.COLLISION
            break
        dist_goal = float(np.linalg.norm(state.position - goal))
        if not cfg.hold_mode and dist_goal <= cfg.goal_tolerance:
            outcome = Outcome.SUCCESS
            break
        if k >= max_steps:
            outcome = Outcome.SUCCESS if cfg.hold_mode else Outcome.TIMEOUT
            break
        if (not cfg.hold_mode and len(speeds) == window
                and float(np.mean(speeds)) < cfg.stuck_speed):
            outcome = Outcome.STUCK
            break

        if planner.kind == "lidar":
            scan = synthesize_scan(scene, state.position, planner.rows,
                                   planner.cols, cfg.max_range, t,
                                   cfg.vfov_deg, workers=cfg.workers,
                                   backend=cfg.backend)

        plan_start = time.perf_counter_ns()
        if planner.kind == "ray":
            obstacle = ray_policy(state, field_obj, bundle, op, cfg.max_range,
                                  t, workers=cfg.workers, backend=cfg.backend)
        elif planner.kind == "esdf":
            obstacle = esdf_policy(state, field_obj, op)
        else:
            obstacle = lidar_policy(state.velocity, scan, op,
                                    cfg.lidar_min_range, workers=cfg.workers,
                                    backend=cfg.backend)
        command = combine([attractor(state, goal, ap), obstacle])
        plan_us = (time.perf_counter_ns() - plan_start) / 1000.0

        a = command.accel
        mag = float(np.linalg.norm(a))
        if mag > cfg.max_accel:
            a = a * (cfg.max_accel / mag)
            n_clamped += 1

        ts.append(t)
        xs.append(state.position)
        vs.append(state.velocity)
        accs.append(a)
        pticks.append(plan_us)

        state = step(state, a, cfg.dt)
        speeds.append(float(np.linalg.norm(state.velocity)))
        k += 1

    # terminal sample: the state at which the outcome was decided
    ts.append(k * cfg.dt)
    xs.append(state.position)
    vs.append(state.velocity)
    accs.append(np.zeros(3))
    pticks.append(0.0)

    if n_clamped:
        logger.debug("rollout clamped acceleration on %d of %d steps", n_clamped, k)

    return TrajectoryRecord(
        t=np.array(ts),
        positions=np.array(xs),
        velocities=np.array(vs),
        accels=np.array(accs),
        plan_time_us=np.array(pticks),
        outcome=outcome,
        n_clamped=n_clamped,
        wall_time_s=time.perf_counter() - wall_start,
    )


def save_trajectory(traj: TrajectoryRecord, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az",
                    "plan_time_us"])
        for i in range(len(traj)):
            row = [traj.t[i], *traj.positions[i], *traj.velocities[i],
                   *traj.accels[i], traj.plan_time_us[i]]
            w.writerow([f"{v:.9g}" for v in row])


# ---------------------------------------------------------------------------
# Batch evaluation

BATCH_CSV_COLUMNS = [
    "tier", "planner", "n_runs", "success_rate", "collision_rate",
    "stuck_rate", "timeout_rate", "smoothness_mean", "smoothness_p10",
    "smoothness_p90", "plan_time_us_mean", "wall_time_s_mean",
]


@dataclass
class BatchRow:
    tier: int
    planner: str
    n_runs: int
    success_rate: float
    collision_rate: float
    stuck_rate: float
    timeout_rate: float
    smoothness_mean: float
    smoothness_p10: float
    smoothness_p90: float
    plan_time_us_mean: float
    wall_time_s_mean: float


@dataclass
class BatchResult:
    rows: list[BatchRow]
    errors: list[str]
    outcomes: dict  # (tier, planner label, seed) -> Outcome
    smoothness_values: dict  # (tier, planner label) -> list[float] over successes


def evaluate_batch(seeds, tiers, planners, params: PolicyParams,
                   base_cfg: RolloutConfig | None = None,
                   bounds: Aabb | None = None,
                   rollout_workers: int = 1,
                   progress=None) -> BatchResult:
    """Run every (seed, tier, planner) rollout and aggregate per cell.

    Worlds are generated per (seed, tier) and shared across planners, as is
    the baked grid. Individual failures (dense worlds with no free
    start/goal, rollout errors) are recorded and never abort the batch.
    """
    specs = [p if isinstance(p, PlannerSpec) else PlannerSpec.parse(p) for p in planners]
    if base_cfg is None:
        base_cfg = RolloutConfig(planner=specs[0], params=params)

    errors: list[str] = []
    outcomes: dict = {}
    results: dict = {}
    for tier in tiers:
        for spec in specs:
            results[(tier, spec.label())] = []

    needs_grid = any(s.kind in ("ray", "esdf") for s in specs)

    def run_world(tier, seed):
        try:
            scene, start, goal = generate_world(seed, tier, bounds)
        except WorldGenError as exc:
            return [(tier, None, seed, None, f"worldgen seed={seed} tier={tier}: {exc}")]
        grid = None
        if needs_grid and not scene.is_dynamic:
            grid = bake_esdf(scene, base_cfg.grid_resolution, pad=base_cfg.grid_pad)
        out = []
        for spec in specs:
            cfg = replace(base_cfg, planner=spec, params=params)
            try:
                traj = rollout(scene, start, goal, cfg,
                               grid=grid if spec.kind in ("ray", "esdf") else None)
                out.append((tier, spec.label(), seed, traj, None))
            except Exception as exc:  # keep the batch alive
                out.append((tier, spec.label(), seed,
                            None, f"rollout seed={seed} tier={tier} {spec.label()}: {exc}"))
        return out

    tasks = [(tier, seed) for tier in tiers for seed in seeds]
    if rollout_workers > 1:
        with ThreadPoolExecutor(max_workers=rollout_workers) as ex:
            chunks = list(ex.map(lambda ts: run_world(*ts), tasks))
    else:
        chunks = [run_world(*task) for task in tasks]

    done = 0
    for chunk in chunks:
        for tier, label, seed, traj, err in chunk:
            done += 1
            if progress is not None:
                progress(done, sum(len(c) for c in chunks))
            if err is not None:
                errors.append(err)
                if label is not None:
                    results[(tier, label)].append(None)
                else:
                    for spec in specs:  # world generation failed: hits all planners
                        results[(tier, spec.label())].append(None)
                continue
            results[(tier, label)].append(traj)
            outcomes[(tier, label, seed)] = traj.outcome

    rows = []
    smooth_map = {}
    for tier in tiers:
        for spec in specs:
            label = spec.label()
            trajs = results[(tier, label)]
            n = len(trajs)
            counts = {o: 0 for o in Outcome}
            smooth_vals = []
            plan_sum = 0.0
            plan_cnt = 0
            wall = []
            for traj in trajs:
                if traj is None:
                    continue
                counts[traj.outcome] += 1
                wall.append(traj.wall_time_s)
                plan_sum += float(traj.plan_time_us[:-1].sum())
                plan_cnt += max(len(traj) - 1, 0)
                if traj.outcome is Outcome.SUCCESS:
                    s = smoothness(traj)
                    if s is not None:
                        smooth_vals.append(s)
            smooth_map[(tier, label)] = smooth_vals
            rows.append(BatchRow(
                tier=tier,
                planner=label,
                n_runs=n,
                success_rate=counts[Outcome.SUCCESS] / n if n else float("nan"),
                collision_rate=counts[Outcome.COLLISION] / n if n else float("nan"),
                stuck_rate=counts[Outcome.STUCK] / n if n else float("nan"),
                timeout_rate=counts[Outcome.TIMEOUT] / n if n else float("nan"),
                smoothness_mean=float(np.mean(smooth_vals)) if smooth_vals else float("nan"),
                smoothness_p10=float(np.percentile(smooth_vals, 10)) if smooth_vals else float("nan"),
                smoothness_p90=float(np.percentile(smooth_vals, 90)) if smooth_vals else float("nan"),
                plan_time_us_mean=plan_sum / plan_cnt if plan_cnt else float("nan"),
                wall_time_s_mean=float(np.mean(wall)) if wall else float("nan"),
            ))
    return BatchResult(rows=rows, errors=errors, outcomes=outcomes,
                       smoothness_values=smooth_map)


def write_batch_csv(result: BatchResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BATCH_CSV_COLUMNS)
        for r in result.rows:
            w.writerow([
                r.tier, r.planner, r.n_runs,
                f"{r.success_rate:.6f}", f"{r.collision_rate:.6f}",
                f"{r.stuck_rate:.6f}", f"{r.timeout_rate:.6f}",
                f"{r.smoothness_mean:.6f}", f"{r.smoothness_p10:.6f}",
                f"{r.smoothness_p90:.6f}", f"{r.plan_time_us_mean:.3f}",
                f"{r.wall_time_s_mean:.4f}",
            ])

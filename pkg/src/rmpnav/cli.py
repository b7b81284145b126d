"""Command-line front end: world generation, rollouts, batch evaluation,
throughput benchmarks, and scan replay.

Exit codes: 0 success, 2 collision, 3 timeout, 4 stuck, 64 usage error,
65 data error. All randomness flows through explicitly passed seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from ._kernels import available_backends, default_backend_name
from .bench import (DEFAULT_RAY_SWEEP, bench_policy, bench_scan_policy,
                    bench_states, format_bench_table, standard_bench_world,
                    write_bench_csv)
from .geometry import (Aabb, SceneFormatError, WorldGenError, generate_world,
                       load_scene, occupied_fraction, save_scene)
from .policies import PRESETS, PolicyParams, lidar_policy, load_params, preset
from .rays import load_scan
from .sim import (Outcome, PlannerSpec, RolloutConfig, evaluate_batch,
                  rollout, save_trajectory, write_batch_csv)

EXIT_OK = 0
EXIT_COLLISION = 2
EXIT_TIMEOUT = 3
EXIT_STUCK = 4
EXIT_USAGE = 64
EXIT_DATA = 65

_OUTCOME_EXIT = {
    Outcome.SUCCESS: EXIT_OK,
    Outcome.COLLISION: EXIT_COLLISION,
    Outcome.TIMEOUT: EXIT_TIMEOUT,
    Outcome.STUCK: EXIT_STUCK,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


@dataclass
class ExperimentConfig:
    """A fully serializable batch experiment; re-running a persisted config
    reproduces the same outcome table."""

    seeds: list[int]
    tiers: list[int]
    planners: list[str]
    preset: str = "static_map"
    bounds: float = 10.0
    out: str = "results.csv"
    workers: int = 1
    rollout: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise SceneFormatError(f"unknown config fields: {sorted(extra)}")
        try:
            return ExperimentConfig(**doc)
        except TypeError as exc:
            raise SceneFormatError(f"malformed experiment config: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


def _parse_vec3(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError(f"expected x,y,z triple, got {text!r}")
    return np.array([float(p) for p in parts])


def _load_policy_params(args) -> PolicyParams:
    if getattr(args, "params", None):
        return load_params(args.params)
    return preset(args.preset)


def _cfg_from_args(args, planner: PlannerSpec, params: PolicyParams) -> RolloutConfig:
    cfg = RolloutConfig(planner=planner, params=params)
    overrides = {}
    for name in ("dt", "max_time", "robot_radius", "goal_tolerance", "workers"):
        val = getattr(args, name.replace("-", "_"), None)
        if val is not None:
            overrides[name] = val
    if getattr(args, "hold", False):
        overrides["hold_mode"] = True
    if getattr(args, "backend", None):
        overrides["backend"] = args.backend
    return replace(cfg, **overrides) if overrides else cfg


# --- subcommands -----------------------------------------------------------

def cmd_gen_world(args) -> int:
    bounds = Aabb.cube(args.bounds)
    scene, start, goal = generate_world(args.seed, args.obstacles, bounds)
    save_scene(scene, args.out)
    occ = occupied_fraction(scene, args.resolution)
    print(f"scene: {args.out}")
    print(f"obstacles: {args.obstacles}  seed: {args.seed}")
    print(f"start: {start.tolist()}  goal: {goal.tolist()}")
    print(f"occupancy@{args.resolution}m: {occ:.4f}")
    return EXIT_OK


def cmd_rollout(args) -> int:
    scene = load_scene(args.scene)
    start = _parse_vec3(args.start) if args.start else scene.start
    goal = _parse_vec3(args.goal) if args.goal else scene.goal
    if start is None or goal is None:
        raise _UsageError("scene file carries no start/goal; pass --start/--goal")
    planner = PlannerSpec.parse(args.planner)
    params = _load_policy_params(args)
    cfg = _cfg_from_args(args, planner, params)
    traj = rollout(scene, start, goal, cfg)
    if args.out:
        save_trajectory(traj, args.out)
    print(f"outcome: {traj.outcome.value}")
    print(f"steps: {len(traj) - 1}  sim_time: {traj.t[-1]:.2f}s  "
          f"wall: {traj.wall_time_s:.2f}s")
    print(f"plan_time_us_mean: {np.mean(traj.plan_time_us[:-1]) if len(traj) > 1 else 0.0:.1f}")
    return _OUTCOME_EXIT[traj.outcome]


def cmd_eval(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"{args.config}: invalid JSON: {exc.msg}") from exc
    cfg = ExperimentConfig.from_dict(doc)
    out = args.out or cfg.out
    params = preset(cfg.preset)
    specs = [PlannerSpec.parse(p) for p in cfg.planners]
    base = RolloutConfig(planner=specs[0], params=params, **cfg.rollout)

    total = len(cfg.seeds) * len(cfg.tiers) * len(specs)
    def progress(done, _n):
        print(f"\r{done}/{total} rollouts", end="", file=sys.stderr, flush=True)

    result = evaluate_batch(cfg.seeds, cfg.tiers, specs, params, base,
                            bounds=Aabb.cube(cfg.bounds),
                            rollout_workers=cfg.workers, progress=progress)
    print(file=sys.stderr)
    write_batch_csv(result, out)
    for err in result.errors:
        print(f"warning: {err}", file=sys.stderr)
    print(f"wrote {out} ({len(result.rows)} rows, {len(result.errors)} failures)")
    return EXIT_OK


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_bench(args) -> int:
    rays = _parse_int_list(args.rays_sweep) if args.rays_sweep else DEFAULT_RAY_SWEEP
    workers = _parse_int_list(args.workers_sweep) if args.workers_sweep else [1]
    backends = (available_backends() if args.backends == "all"
                else [b.strip() for b in args.backends.split(",")])
    scene, grid, _, _ = standard_bench_world(seed=args.seed,
                                             n_obstacles=args.obstacles)
    states = bench_states(scene)
    rows = []
    for backend in backends:
        for w in workers:
            for n in rays:
                rows.append(bench_policy(grid, n, workers=w, repetitions=args.reps,
                                         states=states, backend=backend))
        for size in (args.scan_sizes.split(",") if args.scan_sizes else []):
            r, _, c = size.partition("x")
            for w in workers:
                rows.append(bench_scan_policy(scene, int(r), int(c), workers=w,
                                              repetitions=args.reps,
                                              states=states, backend=backend))
    if args.out:
        write_bench_csv(rows, args.out)
    print(format_bench_table(rows))
    return EXIT_OK


def cmd_replay_scan(args) -> int:
    params = _load_policy_params(args)
    velocities = []
    try:
        with open(args.velocities, "r", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                velocities.append([float(v) for v in row[:3]])
    except (ValueError, OSError) as exc:
        raise SceneFormatError(f"{args.velocities}: bad velocity trace: {exc}") from exc
    if not velocities:
        raise SceneFormatError(f"{args.velocities}: empty velocity trace")

    out_rows = []
    for i, path in enumerate(args.scans):
        vel = velocities[min(i, len(velocities) - 1)]
        try:
            scan = load_scan(path)
        except (SceneFormatError, OSError) as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            continue
        pol = lidar_policy(vel, scan, params.obstacle)
        out_rows.append([path, scan.n_valid, *pol.accel, *pol.metric.ravel()])

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scan", "n_valid", "fx", "fy", "fz",
                    "a00", "a01", "a02", "a10", "a11", "a12", "a20", "a21", "a22"])
        for row in out_rows:
            w.writerow([row[0], row[1]] + [f"{v:.9g}" for v in row[2:]])
    print(f"wrote {args.out} ({len(out_rows)} scans)")
    return EXIT_OK


# --- argument wiring --------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="rmpnav",
                description="Reactive raycast-policy navigation toolkit")
    p.add_argument("--version", action="version", version=f"rmpnav {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-world", help="generate a random cluttered scene file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--obstacles", type=int, required=True)
    g.add_argument("--bounds", type=float, default=10.0,
                   help="cube side length in meters (centered at origin)")
    g.add_argument("--resolution", type=float, default=0.2,
                   help="voxel size for the printed occupancy figure")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_world)

    r = sub.add_parser("rollout", help="run one rollout against a scene file")
    r.add_argument("--scene", required=True)
    r.add_argument("--planner", default="ray:1024",
                   help="ray:N | ray:N^2 | esdf | lidar:ROWSxCOLS")
    r.add_argument("--preset", default="static_map", choices=sorted(PRESETS))
    r.add_argument("--params", help="JSON parameter file overriding --preset")
    r.add_argument("--start", help="x,y,z (default: from scene file)")
    r.add_argument("--goal", help="x,y,z (default: from scene file)")
    r.add_argument("--out", help="trajectory CSV path")
    r.add_argument("--dt", type=float)
    r.add_argument("--max-time", dest="max_time", type=float)
    r.add_argument("--robot-radius", dest="robot_radius", type=float)
    r.add_argument("--goal-tolerance", dest="goal_tolerance", type=float)
    r.add_argument("--hold", action="store_true",
                   help="station-keeping mode: no goal termination")
    r.add_argument("--workers", type=int)
    r.add_argument("--backend", choices=available_backends())
    r.set_defaults(func=cmd_rollout)

    e = sub.add_parser("eval", help="batch evaluation from a config file")
    e.add_argument("--config", required=True)
    e.add_argument("--out", help="override the config's output path")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="policy evaluation throughput benchmark")
    b.add_argument("--rays-sweep", dest="rays_sweep",
                   help="comma-separated ray counts (default 16..65536)")
    b.add_argument("--workers-sweep", dest="workers_sweep",
                   help="comma-separated worker counts (default 1)")
    b.add_argument("--scan-sizes", dest="scan_sizes",
                   help="comma-separated ROWSxCOLS scan sizes")
    b.add_argument("--backends", default=default_backend_name(),
                   help="comma-separated backends, or 'all'")
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--seed", type=int, default=7)
    b.add_argument("--obstacles", type=int, default=100)
    b.add_argument("--out", help="report CSV path")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("replay-scan", help="evaluate the scan policy on recorded scans")
    s.add_argument("--scans", nargs="+", required=True)
    s.add_argument("--velocities", required=True,
                   help="CSV of vx,vy,vz rows, one per scan (last row repeats)")
    s.add_argument("--preset", default="lidar", choices=sorted(PRESETS))
    s.add_argument("--params", help="JSON parameter file overriding --preset")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_replay_scan)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SceneFormatError, WorldGenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Quasi-random ray bundles, sphere-trace distance queries, and synthetic
range scans.

Directions come from a two-base radical-inverse (Halton) sequence mapped to
the sphere, giving deterministic quasi-uniform coverage for any count.
Raycasts advance by the field's own distance value, so free space is crossed
in large steps and no surface thinner than the stepping epsilon is skipped.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._kernels import get_backend
from .geometry import EsdfGrid, Scene, SceneFormatError

__all__ = [
    "RayBundle",
    "RangeScan",
    "halton",
    "sample_directions",
    "raycast",
    "raycast_many",
    "scan_pattern",
    "synthesize_scan",
    "save_scan",
    "load_scan",
]

DEFAULT_MAX_RANGE = 20.0
ANALYTIC_SURFACE_EPS = 1e-4
GRID_STEP_SCALE = 0.9  # margin for interpolation error in baked fields
DEFAULT_VFOV_DEG = 45.0

SCAN_FORMAT = "rmpnav-scan"
SCAN_VERSION = 1


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    i = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(i.shape, dtype=np.float64)
    f = 1.0 / base
    while np.any(i > 0):
        out += f * (i % base)
        i //= base
        f /= base
    return out


def halton(i: int, base: int) -> float:
    """Radical-inverse value of index ``i`` (>= 1) in the given base."""
    if i < 1:
        raise ValueError("halton index starts at 1")
    if base < 2:
        raise ValueError("halton base must be >= 2")
    return float(_radical_inverse(np.array([i]), base)[0])


@dataclass(frozen=True)
class RayBundle:
    """A fixed set of unit directions radiating from a common origin."""

    directions: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.directions, dtype=np.float64).reshape(-1, 3)
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    def __len__(self) -> int:
        return self.directions.shape[0]


@functools.lru_cache(maxsize=16)
def _cached_directions(n: int) -> np.ndarray:
    idx = np.arange(1, n + 1)
    polar = np.arccos(1.0 - 2.0 * _radical_inverse(idx, 2))
    azimuth = 2.0 * np.pi * _radical_inverse(idx, 3)
    sp = np.sin(polar)
    dirs = np.stack([sp * np.cos(azimuth), sp * np.sin(azimuth), np.cos(polar)], axis=1)
    dirs.setflags(write=False)
    return dirs


def sample_directions(n: int) -> RayBundle:
    """Quasi-uniform sphere sampling: index i >= 1 maps base-2 and base-3
    radical inverses to polar angle ``arccos(1 - 2 h2)`` and azimuth
    ``2 pi h3``. Index 0 is skipped; it would pin a duplicate ray at the
    pole."""
    if n < 1:
        raise ValueError("need at least one direction")
    return RayBundle(_cached_directions(n))


def _surface_eps(field) -> float:
    if isinstance(field, EsdfGrid):
        return 0.5 * field.resolution
    return ANALYTIC_SURFACE_EPS


def raycast_many(field, origin, dirs: np.ndarray, max_range: float = DEFAULT_MAX_RANGE,
                 t: float = 0.0, workers: int = 1, backend: str | None = None,
                 surface_epsilon: float | None = None) -> np.ndarray:
    """Distance to first hit along each direction; ``inf`` marks a miss.

    Grids are traced on the interpolated field with a 0.9 step factor and an
    epsilon of half a voxel; analytic scenes take exact full steps with a
    1e-4 m epsilon. Rays report at most ``max_range``; for grids, space
    outside the grid domain is treated as free.
    """
    be = get_backend(backend)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    eps = _surface_eps(field) if surface_epsilon is None else surface_epsilon
    if isinstance(field, EsdfGrid):
        return be.grid_trace(field.values, field.origin, field.resolution,
                             origin, dirs, max_range, eps, GRID_STEP_SCALE, workers)
    if isinstance(field, Scene):
        return be.scene_trace(field.packed(), origin, dirs, max_range, eps,
                              t, workers)
    raise TypeError(f"cannot raycast field of type {type(field).__name__}")


def raycast(field, origin, direction, max_range: float = DEFAULT_MAX_RANGE,
            t: float = 0.0, surface_epsilon: float | None = None) -> float:
    """Single-ray convenience wrapper; returns ``inf`` on miss."""
    d = raycast_many(field, origin, np.asarray(direction, dtype=float).reshape(1, 3),
                     max_range, t, surface_epsilon=surface_epsilon)
    return float(d[0])


# --- range scans ----------------------------------------------------------

@dataclass(frozen=True)
class RangeScan:
    """Beams of (sensor-frame direction, measured range) plus the sensor pose.

    Invalid beams carry an ``inf`` range and are skipped by consumers.
    """

    directions: np.ndarray
    ranges: np.ndarray
    valid: np.ndarray
    position: np.ndarray
    orientation: np.ndarray = dc_field(default_factory=lambda: np.eye(3))
    rows: int = 0
    cols: int = 0
    vfov_deg: float = DEFAULT_VFOV_DEG

    def __post_init__(self):
        d = np.ascontiguousarray(self.directions, dtype=np.float64).reshape(-1, 3)
        r = np.ascontiguousarray(self.ranges, dtype=np.float64).reshape(-1)
        v = np.ascontiguousarray(self.valid, dtype=bool).reshape(-1)
        if not (d.shape[0] == r.shape[0] == v.shape[0]):
            raise ValueError("directions, ranges, valid must have equal length")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "valid", v)
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float).reshape(3, 3))

    def __len__(self) -> int:
        return self.directions.shape[0]

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    def world_directions(self) -> np.ndarray:
        return self.directions @ self.orientation.T


@functools.lru_cache(maxsize=8)
def _cached_pattern(rows: int, cols: int, vfov_deg: float) -> np.ndarray:
    if rows == 1:
        elev = np.zeros(1)
    else:
        elev = np.deg2rad(np.linspace(-vfov_deg, vfov_deg, rows))
    azim = 2.0 * np.pi * np.arange(cols) / cols
    ce, se = np.cos(elev), np.sin(elev)
    dirs = np.empty((rows * cols, 3))
    for r in range(rows):
        sl = slice(r * cols, (r + 1) * cols)
        dirs[sl, 0] = ce[r] * np.cos(azim)
        dirs[sl, 1] = ce[r] * np.sin(azim)
        dirs[sl, 2] = se[r]
    dirs.setflags(write=False)
    return dirs


def scan_pattern(rows: int, cols: int, vfov_deg: float = DEFAULT_VFOV_DEG) -> np.ndarray:
    """Regular azimuth x elevation beam lattice in the sensor frame,
    row-major, elevations spanning the vertical field of view."""
    if rows < 1 or cols < 1:
        raise ValueError("scan pattern needs rows, cols >= 1")
    return _cached_pattern(rows, cols, float(vfov_deg))


def synthesize_scan(scene: Scene, position, rows: int, cols: int,
                    max_range: float = DEFAULT_MAX_RANGE, t: float = 0.0,
                    vfov_deg: float = DEFAULT_VFOV_DEG, orientation=None,
                    dropout: float = 0.0, rng=None,
                    workers: int = 1, backend: str | None = None) -> RangeScan:
    """Cast a beam lattice against the (time-displaced) scene.

    Misses are marked invalid. ``dropout`` invalidates that fraction of beams
    at random (pass a seeded generator for determinism).
    """
    dirs = scan_pattern(rows, cols, vfov_deg)
    orientation = np.eye(3) if orientation is None else np.asarray(orientation, dtype=float)
    world_dirs = np.ascontiguousarray(dirs @ orientation.T)
    ranges = raycast_many(scene, position, world_dirs, max_range, t,
                          workers=workers, backend=backend)
    valid = np.isfinite(ranges)
    if dropout > 0.0:
        gen = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        valid = valid & (gen.random(len(ranges)) >= dropout)
    ranges = np.where(valid, ranges, np.inf)
    return RangeScan(dirs, ranges, valid, position, orientation, rows, cols, vfov_deg)


def save_scan(scan: RangeScan, path) -> None:
    rows, cols = scan.rows, scan.cols
    if rows * cols != len(scan):
        raise ValueError("only lattice scans (rows x cols) can be serialized")
    beams = []
    for i in range(len(scan)):
        r, c = divmod(i, cols)
        rng = float(scan.ranges[i]) if scan.valid[i] else -1.0
        beams.append([r, c, rng, int(scan.valid[i])])
    doc = {
        "format": SCAN_FORMAT,
        "version": SCAN_VERSION,
        "position": [float(v) for v in scan.position],
        "orientation": [[float(v) for v in row] for row in scan.orientation],
        "rows": rows,
        "cols": cols,
        "vfov_deg": float(scan.vfov_deg),
        "beams": beams,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_scan(path) -> RangeScan:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        if doc.get("format") != SCAN_FORMAT:
            raise SceneFormatError(f"{path}: not a scan document")
        if doc.get("version") != SCAN_VERSION:
            raise SceneFormatError(f"{path}: unsupported scan version {doc.get('version')!r}")
        rows, cols = int(doc["rows"]), int(doc["cols"])
        vfov = float(doc["vfov_deg"])
        dirs = scan_pattern(rows, cols, vfov)
        ranges = np.full(rows * cols, np.inf)
        valid = np.zeros(rows * cols, dtype=bool)
        for r, c, rng, ok in doc["beams"]:
            i = int(r) * cols + int(c)
            if ok:
                ranges[i] = float(rng)
                valid[i] = True
        return RangeScan(dirs, ranges, valid, doc["position"], doc["orientation"],
                         rows, cols, vfov)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"{path}: malformed scan document: {exc}") from exc

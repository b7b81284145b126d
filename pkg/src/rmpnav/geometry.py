"""World representation: analytic primitive scenes with boolean composition,
baked voxel signed-distance grids, and distance/gradient queries.

The analytic scene is the ground truth; grids are baked from it and answer
interpolated distance and finite-difference gradient queries. Signed
distances are positive in free space. Boolean subtraction uses
``max(d_a, -d_b)``, which is a conservative lower bound rather than an exact
distance near carved seams; that is sufficient for safe sphere tracing.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ._kernels import get_backend

__all__ = [
    "Aabb",
    "Primitive",
    "Scene",
    "EsdfGrid",
    "EsdfSample",
    "WorldGenError",
    "SceneFormatError",
    "scene_distance",
    "scene_distance_many",
    "bake_esdf",
    "esdf_lookup",
    "occupied_fraction",
    "generate_world",
    "save_scene",
    "load_scene",
    "scene_to_dict",
    "scene_from_dict",
    "save_esdf",
    "load_esdf",
]

SCENE_FORMAT = "rmpnav-scene"
SCENE_VERSION = 1
ESDF_MAGIC = b"ESDF"
ESDF_VERSION = 1

DEFAULT_RESOLUTION = 0.2
DEFAULT_MAX_VOXELS = 512**3

KIND_SPHERE = 0
KIND_BOX = 1
OP_UNION = 0
OP_SUBTRACT = 1


class WorldGenError(RuntimeError):
    """Raised when rejection sampling cannot place a free start/goal pair."""


class SceneFormatError(ValueError):
    """Raised for malformed or unsupported scene/scan files."""


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by its min and max corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if not np.all(hi > lo):
            raise ValueError("degenerate bounds: hi must exceed lo on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    @staticmethod
    def cube(side: float, center=(0.0, 0.0, 0.0)) -> "Aabb":
        c = np.asarray(center, dtype=float)
        h = 0.5 * side
        return Aabb(c - h, c + h)


@dataclass(frozen=True)
class Primitive:
    """One obstacle: a sphere or an axis-aligned box, optionally moving.

    ``size`` holds the radius (spheres, all three entries equal) or the
    per-axis half extents (boxes). ``op`` is how this primitive merges into
    the scene, in list order: ``union`` adds solid, ``subtract`` carves it
    out of everything before it.
    """

    kind: str
    center: np.ndarray
    size: np.ndarray
    op: str = "union"
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.kind not in ("sphere", "box"):
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if self.op not in ("union", "subtract"):
            raise ValueError(f"unknown boolean op {self.op!r}")
        center = np.asarray(self.center, dtype=float).reshape(3)
        size = np.asarray(self.size, dtype=float)
        if size.ndim == 0:
            size = np.full(3, float(size))
        size = size.reshape(3)
        if np.any(size <= 0):
            raise ValueError("primitive size must be positive")
        if self.kind == "sphere" and not np.all(size == size[0]):
            raise ValueError("sphere size entries must be equal (the radius)")
        velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "velocity", velocity)

    @staticmethod
    def sphere(center, radius: float, op: str = "union", velocity=(0, 0, 0)) -> "Primitive":
        return Primitive("sphere", center, float(radius), op, velocity)

    @staticmethod
    def box(center, half_extents, op: str = "union", velocity=(0, 0, 0)) -> "Primitive":
        return Primitive("box", center, half_extents, op, velocity)

    @property
    def is_moving(self) -> bool:
        return bool(np.any(self.velocity != 0.0))


class Scene:
    """An ordered list of primitives inside fixed bounds.

    Immutable after construction; all queries are read-only and callable
    concurrently.
    """

    def __init__(self, bounds: Aabb, primitives=(), seed: int | None = None,
                 start=None, goal=None):
        self.bounds = bounds
        self.primitives = tuple(primitives)
        self.seed = seed
        self.start = None if start is None else np.asarray(start, dtype=float).reshape(3)
        self.goal = None if goal is None else np.asarray(goal, dtype=float).reshape(3)
        self._pack = _pack_scene(self)

    @property
    def is_dynamic(self) -> bool:
        return any(p.is_moving for p in self.primitives)

    @property
    def empty_distance(self) -> float:
        """Distance reported when nothing is hit (bounds diagonal)."""
        return self.bounds.diagonal

    def packed(self) -> dict:
        """Flat-array form consumed by the kernels."""
        return self._pack


def _pack_scene(scene: Scene) -> dict:
    n = len(scene.primitives)
    kinds = np.zeros(n, dtype=np.int8)
    ops = np.zeros(n, dtype=np.int8)
    centers = np.zeros((n, 3), dtype=np.float64)
    sizes = np.zeros((n, 3), dtype=np.float64)
    velocities = np.zeros((n, 3), dtype=np.float64)
    for i, p in enumerate(scene.primitives):
        kinds[i] = KIND_SPHERE if p.kind == "sphere" else KIND_BOX
        ops[i] = OP_UNION if p.op == "union" else OP_SUBTRACT
        centers[i] = p.center
        sizes[i] = p.size
        velocities[i] = p.velocity
    return {
        "kinds": kinds,
        "ops": ops,
        "centers": centers,
        "sizes": sizes,
        "velocities": velocities,
        "empty_dist": scene.bounds.diagonal,
    }


def scene_distance(scene: Scene, x, t: float = 0.0) -> float:
    """Signed distance from ``x`` to the composed scene at time ``t``.

    Empty scenes report the bounds diagonal. Exact for unions of primitives;
    a conservative lower bound near subtraction seams.
    """
    out = scene_distance_many(scene, np.asarray(x, dtype=float).reshape(1, 3), t)
    return float(out[0])


def scene_distance_many(scene: Scene, pts: np.ndarray, t: float = 0.0) -> np.ndarray:
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
    return get_backend().scene_distance_many(scene.packed(), pts, float(t))


@dataclass(frozen=True)
class EsdfGrid:
    """Regular grid of signed distances sampled at node points.

    Node ``(i, j, k)`` sits at ``origin + (i, j, k) * resolution``; values are
    indexed ``values[i, j, k]`` with shape ``dims``.
    """

    origin: np.ndarray
    resolution: float
    dims: tuple[int, int, int]
    values: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        dims = tuple(int(d) for d in self.dims)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if any(d < 2 for d in dims):
            raise ValueError("grid needs at least 2 nodes per axis")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != dims:
            raise ValueError(f"values shape {values.shape} != dims {dims}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", values)

    @property
    def domain(self) -> Aabb:
        hi = self.origin + (np.array(self.dims) - 1) * self.resolution
        return Aabb(self.origin, hi)

    def node_position(self, i: int, j: int, k: int) -> np.ndarray:
        return self.origin + np.array([i, j, k], dtype=float) * self.resolution

    def adjacent_delta_max(self) -> float:
        """Largest |value difference| between axis-adjacent nodes."""
        v = self.values
        return max(
            float(np.abs(np.diff(v, axis=a)).max()) for a in range(3)
        )


@dataclass(frozen=True)
class EsdfSample:
    """Interpolated distance and normalized gradient at a query point."""

    distance: float
    gradient: np.ndarray
    extrapolated: bool = False

    @property
    def degenerate(self) -> bool:
        return not np.any(self.gradient != 0.0)


def bake_esdf(scene: Scene, resolution: float = DEFAULT_RESOLUTION, pad: float = 0.0,
              max_voxels: int = DEFAULT_MAX_VOXELS) -> EsdfGrid:
    """Sample the analytic scene at t=0 onto a regular grid covering the
    scene bounds (optionally inflated by ``pad`` on every side).

    Rejects grids beyond ``max_voxels`` nodes.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    lo = scene.bounds.lo - pad
    hi = scene.bounds.hi + pad
    dims = tuple(int(np.ceil((hi[a] - lo[a]) / resolution)) + 1 for a in range(3))
    n_nodes = dims[0] * dims[1] * dims[2]
    if n_nodes > max_voxels:
        raise ValueError(
            f"grid of {dims} = {n_nodes} voxels exceeds the {max_voxels} voxel bound"
        )
    values = get_backend().bake_values(scene.packed(), lo, float(resolution), dims)
    return EsdfGrid(lo, float(resolution), dims, values)


def esdf_lookup(grid: EsdfGrid, x) -> EsdfSample:
    """Trilinear distance plus central-difference gradient at ``x``.

    The gradient uses a step of one resolution on the interpolated field and
    is returned normalized; if the raw finite difference is shorter than
    1e-9 the gradient is the zero vector (degenerate). Queries outside the
    grid clamp to the boundary and are flagged ``extrapolated``.
    """
    x = np.asarray(x, dtype=float).reshape(1, 3)
    d, g, extrap = get_backend().esdf_sample_many(
        grid.values, grid.origin, grid.resolution, x
    )
    return EsdfSample(float(d[0]), g[0], bool(extrap[0]))


def esdf_lookup_many(grid: EsdfGrid, pts: np.ndarray):
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
    return get_backend().esdf_sample_many(grid.values, grid.origin, grid.resolution, pts)


def occupied_fraction(scene: Scene, resolution: float = DEFAULT_RESOLUTION) -> float:
    """Fraction of grid nodes inside solid geometry at the given resolution."""
    grid = bake_esdf(scene, resolution, pad=0.0)
    return float(np.mean(grid.values <= 0.0))


def generate_world(seed: int, n_obstacles: int, bounds: Aabb | None = None,
                   size_range: tuple[float, float] = (0.3, 1.5),
                   subtract_prob: float = 0.15,
                   min_clearance: float = 0.5,
                   separation_frac: float = 0.6,
                   max_attempts: int = 10000):
    """Sample a random cluttered world plus a free start/goal pair.

    Primitive kind, center, and size are uniform over the bounds; start and
    goal are rejection-sampled in free space on opposite halves of the volume
    with at least ``separation_frac`` of the bounds diagonal between them.
    Deterministic in ``seed``.

    Returns ``(scene, start, goal)``; the scene also carries them.
    """
    if n_obstacles < 0:
        raise ValueError("n_obstacles must be >= 0")
    if bounds is None:
        bounds = Aabb.cube(10.0)
    rng = np.random.default_rng(seed)
    lo_size, hi_size = size_range

    prims = []
    for i in range(n_obstacles):
        is_sphere = rng.random() < 0.5
        center = rng.uniform(bounds.lo, bounds.hi)
        if is_sphere:
            size = np.full(3, rng.uniform(lo_size, hi_size))
            kind = "sphere"
        else:
            size = rng.uniform(lo_size, hi_size, size=3)
            kind = "box"
        op = "union"
        if i > 0 and rng.random() < subtract_prob:
            op = "subtract"
        prims.append(Primitive(kind, center, size, op))

    scene = Scene(bounds, prims, seed=seed)

    # Start on the low-x half, goal on the high-x half, far enough apart that
    # the trajectory has to cross the clutter.
    mid_x = bounds.center[0]
    min_sep = separation_frac * bounds.diagonal
    start = goal = None
    for _ in range(max_attempts):
        s = rng.uniform(bounds.lo, bounds.hi)
        s[0] = rng.uniform(bounds.lo[0], mid_x)
        g = rng.uniform(bounds.lo, bounds.hi)
        g[0] = rng.uniform(mid_x, bounds.hi[0])
        if np.linalg.norm(g - s) < min_sep:
            continue
        if scene_distance(scene, s) <= min_clearance:
            continue
        if scene_distance(scene, g) <= min_clearance:
            continue
        start, goal = s, g
        break
    if start is None:
        raise WorldGenError(
            f"no free start/goal pair with clearance {min_clearance} m after "
            f"{max_attempts} attempts (seed={seed}, n_obstacles={n_obstacles})"
        )
    scene = Scene(bounds, prims, seed=seed, start=start, goal=goal)
    return scene, start, goal


# ---------------------------------------------------------------------------
# Scene files (versioned JSON)

def scene_to_dict(scene: Scene) -> dict:
    prims = []
    for p in scene.primitives:
        entry = {
            "kind": p.kind,
            "center": [float(v) for v in p.center],
            "size": float(p.size[0]) if p.kind == "sphere" else [float(v) for v in p.size],
            "op": p.op,
            "velocity": [float(v) for v in p.velocity],
        }
        prims.append(entry)
    doc = {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "seed": scene.seed,
        "bounds": {
            "min": [float(v) for v in scene.bounds.lo],
            "max": [float(v) for v in scene.bounds.hi],
        },
        "start": None if scene.start is None else [float(v) for v in scene.start],
        "goal": None if scene.goal is None else [float(v) for v in scene.goal],
        "primitives": prims,
    }
    return doc


def scene_from_dict(doc: dict) -> Scene:
    try:
        if doc.get("format") != SCENE_FORMAT:
            raise SceneFormatError(f"not a scene document (format={doc.get('format')!r})")
        if doc.get("version") != SCENE_VERSION:
            raise SceneFormatError(f"unsupported scene version {doc.get('version')!r}")
        b = doc["bounds"]
        bounds = Aabb(b["min"], b["max"])
        prims = [
            Primitive(
                kind=e["kind"],
                center=e["center"],
                size=e["size"],
                op=e.get("op", "union"),
                velocity=e.get("velocity", (0.0, 0.0, 0.0)),
            )
            for e in doc.get("primitives", [])
        ]
        return Scene(bounds, prims, seed=doc.get("seed"),
                     start=doc.get("start"), goal=doc.get("goal"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"malformed scene document: {exc}") from exc


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scene(path) -> Scene:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scene_from_dict(doc)


# ---------------------------------------------------------------------------
# ESDF binary cache: header (magic, version u32, origin 3xf64, resolution f64,
# dims 3xu32, little-endian) followed by f32 values in x-fastest order.

_ESDF_HEADER = struct.Struct("<4sI3ddd3I")  # magic, version, origin, res, dims


def save_esdf(grid: EsdfGrid, path) -> None:
    header = _ESDF_HEADER.pack(
        ESDF_MAGIC, ESDF_VERSION,
        *[float(v) for v in grid.origin], float(grid.resolution), *grid.dims,
    )
    data = np.asfortranarray(grid.values, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="F"))


def load_esdf(path) -> EsdfGrid:
    with open(path, "rb") as fh:
        raw = fh.read(_ESDF_HEADER.size)
        if len(raw) != _ESDF_HEADER.size:
            raise SceneFormatError(f"{path}: truncated ESDF header")
        magic, version, ox, oy, oz, res, nx, ny, nz = _ESDF_HEADER.unpack(raw)
        if magic != ESDF_MAGIC:
            raise SceneFormatError(f"{path}: bad magic {magic!r}")
        if version != ESDF_VERSION:
            raise SceneFormatError(f"{path}: unsupported ESDF version {version}")
        count = nx * ny * nz
        buf = fh.read(4 * count)
        if len(buf) != 4 * count:
            raise SceneFormatError(f"{path}: truncated ESDF payload")
    values = np.frombuffer(buf, dtype="<f4").astype(np.float64)
    values = values.reshape((nx, ny, nz), order="F")
    return EsdfGrid(np.array([ox, oy, oz]), res, (nx, ny, nz), np.ascontiguousarray(values))

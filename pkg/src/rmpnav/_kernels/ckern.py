"""Backend interface over the compiled chunk kernels."""

from __future__ import annotations

import numpy as np

from . import _ckern
from ._pool import CHUNK, pairwise_fold, run_chunks

name = "compiled"
compiled = True


def _pack_args(pack: dict):
    return (pack["kinds"], pack["ops"], pack["centers"], pack["sizes"],
            pack["velocities"], pack["empty_dist"])


def scene_distance_many(pack: dict, pts: np.ndarray, t: float) -> np.ndarray:
    out = np.empty(pts.shape[0])
    _ckern.scene_distance_chunk(*_pack_args(pack), t, pts, 0, pts.shape[0], out)
    return out


def bake_values(pack: dict, origin, res: float, dims) -> np.ndarray:
    nx, ny, nz = dims
    origin = np.asarray(origin, dtype=np.float64)
    out = np.empty((nx, ny, nz), dtype=np.float64)
    args = _pack_args(pack)

    def do_chunk(idx, s, e):
        _ckern.bake_chunk(*args, origin[0], origin[1], origin[2], res, s, e, out)

    run_chunks(do_chunk, nx, workers=1, chunk=max(1, nx // 8))
    return out


def esdf_sample_many(values: np.ndarray, origin, res: float, pts: np.ndarray):
    origin = np.asarray(origin, dtype=np.float64)
    n = pts.shape[0]
    d = np.empty(n)
    g = np.empty((n, 3))
    flag = np.empty(n, dtype=np.uint8)
    _ckern.esdf_sample_chunk(values, origin[0], origin[1], origin[2], res,
                             pts, 0, n, d, g, flag)
    return d, g, flag.astype(bool)


def grid_trace(values: np.ndarray, origin, res: float, start, dirs: np.ndarray,
               max_range: float, eps: float, step_scale: float,
               workers: int = 1) -> np.ndarray:
    origin = np.asarray(origin, dtype=np.float64)
    start = np.asarray(start, dtype=np.float64)
    out = np.empty(dirs.shape[0])

    def do_chunk(idx, s, e):
        _ckern.grid_trace_chunk(values, origin[0], origin[1], origin[2], res,
                                start[0], start[1], start[2], dirs,
                                max_range, eps, step_scale, s, e, out)

    run_chunks(do_chunk, dirs.shape[0], workers)
    return out


def scene_trace(pack: dict, start, dirs: np.ndarray, max_range: float,
                eps: float, t: float, workers: int = 1,
                step_scale: float = 1.0) -> np.ndarray:
    start = np.asarray(start, dtype=np.float64)
    out = np.empty(dirs.shape[0])
    args = _pack_args(pack)

    def do_chunk(idx, s, e):
        _ckern.scene_trace_chunk(*args, t, start[0], start[1], start[2], dirs,
                                 max_range, eps, step_scale, s, e, out)

    run_chunks(do_chunk, dirs.shape[0], workers)
    return out


def policy_reduce(dirs: np.ndarray, dists: np.ndarray, v, params: tuple,
                  min_range: float = 0.0, workers: int = 1):
    v = np.asarray(v, dtype=np.float64)
    n = dirs.shape[0]
    spans = max(1, -(-n // CHUNK))
    slots = np.zeros((spans, 13))

    def do_chunk(idx, s, e):
        _ckern.policy_reduce_chunk(dirs, dists, v[0], v[1], v[2], *params,
                                   min_range, s, e, slots[idx])

    run_chunks(do_chunk, n, workers)
    total = pairwise_fold(slots)
    return total[0:9].reshape(3, 3), total[9:12], int(total[12])

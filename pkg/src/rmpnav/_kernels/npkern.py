"""Pure-NumPy kernel backend.

Semantically identical to the compiled backend (same interpolation form,
same stepping rule, same chunked reduction), vectorized over rays/points
instead of looping. Used automatically when the extension is unavailable and
kept as the reference twin for equivalence tests.
"""

from __future__ import annotations

import numpy as np

from ._pool import CHUNK, pairwise_fold, run_chunks

name = "numpy"
compiled = False


# --- analytic scene -------------------------------------------------------

def scene_distance_many(pack: dict, pts: np.ndarray, t: float) -> np.ndarray:
    kinds = pack["kinds"]
    ops = pack["ops"]
    centers = pack["centers"]
    sizes = pack["sizes"]
    vels = pack["velocities"]
    d = np.full(pts.shape[0], pack["empty_dist"], dtype=np.float64)
    for i in range(kinds.shape[0]):
        c = centers[i] + vels[i] * t
        rel = pts - c
        if kinds[i] == 0:  # sphere
            dp = np.sqrt(np.einsum("nj,nj->n", rel, rel)) - sizes[i, 0]
        else:  # box
            q = np.abs(rel) - sizes[i]
            outside = np.sqrt(np.einsum("nj,nj->n", np.maximum(q, 0.0), np.maximum(q, 0.0)))
            inside = np.minimum(q.max(axis=1), 0.0)
            dp = outside + inside
        if ops[i] == 0:
            np.minimum(d, dp, out=d)
        else:
            np.maximum(d, -dp, out=d)
    return d


def bake_values(pack: dict, origin, res: float, dims) -> np.ndarray:
    nx, ny, nz = dims
    origin = np.asarray(origin, dtype=np.float64)
    out = np.empty((nx, ny, nz), dtype=np.float64)
    ys = origin[1] + res * np.arange(ny)
    zs = origin[2] + res * np.arange(nz)
    gy, gz = np.meshgrid(ys, zs, indexing="ij")
    slab = np.empty((ny * nz, 3), dtype=np.float64)
    slab[:, 1] = gy.ravel()
    slab[:, 2] = gz.ravel()
    for ix in range(nx):
        slab[:, 0] = origin[0] + res * ix
        out[ix] = scene_distance_many(pack, slab, 0.0).reshape(ny, nz)
    return out


# --- grid interpolation ---------------------------------------------------

def _interp_clamped(values: np.ndarray, origin: np.ndarray, res: float,
                    pts: np.ndarray) -> np.ndarray:
    dims = np.array(values.shape)
    u = (pts - origin) / res
    u = np.clip(u, 0.0, dims - 1.0)
    cell = np.minimum(np.floor(u).astype(np.intp), dims - 2)
    f = u - cell
    ix, iy, iz = cell[:, 0], cell[:, 1], cell[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    v000 = values[ix, iy, iz]
    v001 = values[ix, iy, iz + 1]
    v010 = values[ix, iy + 1, iz]
    v011 = values[ix, iy + 1, iz + 1]
    v100 = values[ix + 1, iy, iz]
    v101 = values[ix + 1, iy, iz + 1]
    v110 = values[ix + 1, iy + 1, iz]
    v111 = values[ix + 1, iy + 1, iz + 1]
    c00 = v000 + fz * (v001 - v000)
    c01 = v010 + fz * (v011 - v010)
    c10 = v100 + fz * (v101 - v100)
    c11 = v110 + fz * (v111 - v110)
    c0 = c00 + fy * (c01 - c00)
    c1 = c10 + fy * (c11 - c10)
    return c0 + fx * (c1 - c0)


def esdf_sample_many(values: np.ndarray, origin, res: float, pts: np.ndarray):
    origin = np.asarray(origin, dtype=np.float64)
    dims = np.array(values.shape)
    u = (pts - origin) / res
    extrap = np.any((u < 0.0) | (u > dims - 1.0), axis=1)
    d = _interp_clamped(values, origin, res, pts)
    grad = np.empty_like(pts)
    for a in range(3):
        step = np.zeros(3)
        step[a] = res
        dp = _interp_clamped(values, origin, res, pts + step)
        dm = _interp_clamped(values, origin, res, pts - step)
        grad[:, a] = (dp - dm) / (2.0 * res)
    norm = np.sqrt(np.einsum("nj,nj->n", grad, grad))
    ok = norm >= 1e-9
    grad[~ok] = 0.0
    grad[ok] /= norm[ok, None]
    return d, grad, extrap


# --- ray-box slab interval (shared by both backends' grid tracing) --------

def _box_span(start: np.ndarray, dirs: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (lo - start) / dirs
        tb = (hi - start) / dirs
    t_lo = np.minimum(ta, tb)
    t_hi = np.maximum(ta, tb)
    zero = dirs == 0.0
    inside = (start >= lo) & (start <= hi)
    t_lo = np.where(zero, np.where(inside, -np.inf, np.inf), t_lo)
    t_hi = np.where(zero, np.where(inside, np.inf, -np.inf), t_hi)
    return t_lo.max(axis=1), t_hi.min(axis=1)


# --- sphere tracing -------------------------------------------------------

def _trace_span(distance_at, start, dirs, t_begin, t_end, eps, step_scale, out):
    """March rays forward by the field value until hit (< eps) or t_end."""
    n = dirs.shape[0]
    t = t_begin.copy()
    alive = np.nonzero(t <= t_end)[0]
    while alive.size:
        pts = start + t[alive, None] * dirs[alive]
        d = distance_at(pts)
        hit = d < eps
        hit_idx = alive[hit]
        out[hit_idx] = t[hit_idx]
        alive = alive[~hit]
        if not alive.size:
            break
        t[alive] += step_scale * d[~hit]
        alive = alive[t[alive] <= t_end[alive]]
    return out


def grid_trace(values: np.ndarray, origin, res: float, start, dirs: np.ndarray,
               max_range: float, eps: float, step_scale: float,
               workers: int = 1) -> np.ndarray:
    origin = np.asarray(origin, dtype=np.float64)
    start = np.asarray(start, dtype=np.float64)
    dims = np.array(values.shape)
    hi = origin + (dims - 1) * res
    out = np.full(dirs.shape[0], np.inf)

    def do_chunk(idx, s, e):
        d_sl = dirs[s:e]
        t0, t1 = _box_span(start, d_sl, origin, hi)
        t_begin = np.maximum(t0, 0.0)
        t_end = np.minimum(t1, max_range)
        _trace_span(lambda p: _interp_clamped(values, origin, res, p),
                    start, d_sl, t_begin, t_end, eps, step_scale, out[s:e])

    run_chunks(do_chunk, dirs.shape[0], workers)
    return out


def scene_trace(pack: dict, start, dirs: np.ndarray, max_range: float,
                eps: float, t: float, workers: int = 1,
                step_scale: float = 1.0) -> np.ndarray:
    start = np.asarray(start, dtype=np.float64)
    out = np.full(dirs.shape[0], np.inf)

    def do_chunk(idx, s, e):
        d_sl = dirs[s:e]
        t_begin = np.zeros(e - s)
        t_end = np.full(e - s, max_range)
        _trace_span(lambda p: scene_distance_many(pack, p, t),
                    start, d_sl, t_begin, t_end, eps, step_scale, out[s:e])

    run_chunks(do_chunk, dirs.shape[0], workers)
    return out


# --- per-ray obstacle policy reduction -------------------------------------

def policy_reduce(dirs: np.ndarray, dists: np.ndarray, v, params: tuple,
                  min_range: float = 0.0, workers: int = 1):
    """Evaluate one obstacle policy per hit ray and sum metrics and
    metric-weighted accelerations over all rays.

    Returns ``(metric_sum (3,3), weighted_accel_sum (3,), n_hits)``. Rays
    with non-finite distance or range below ``min_range`` are skipped.
    """
    eta_rep, nu_rep, eta_damp, nu_damp, eps_p, radius, c = params
    v = np.asarray(v, dtype=np.float64)
    n = dirs.shape[0]
    spans = max(1, -(-n // CHUNK))
    slots = np.zeros((spans, 13))

    def do_chunk(idx, s, e):
        d = dists[s:e]
        m = np.isfinite(d) & (d >= min_range)
        if not m.any():
            return
        d = d[m]
        dm = dirs[s:e][m]
        toward = dm @ v
        frep = eta_rep * np.exp(-d / nu_rep)
        g = np.maximum(toward, 0.0)
        fdamp = eta_damp / (d / nu_damp + eps_p) * g * g
        w = np.where(d < radius, d * d / (radius * radius) - 2.0 * d / radius + 1.0, 0.0)
        smag = fdamp / (fdamp + c * np.log1p(np.exp(-2.0 * c * fdamp)))
        a = w * smag * smag
        away = -dm
        slot = slots[idx]
        slot[0:9] = np.einsum("n,ni,nj->ij", a, away, away).ravel()
        slot[9:12] = (a * (frep + fdamp)) @ away
        slot[12] = m.sum()

    run_chunks(do_chunk, n, workers)
    total = pairwise_fold(slots)
    return total[0:9].reshape(3, 3), total[9:12], int(total[12])

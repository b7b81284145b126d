# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chunk kernels: scene distance, grid interpolation, sphere
tracing, and per-ray policy reduction.

Each entry point processes rays/points ``[s, e)`` of its input and writes
only into its own output span or slot, releasing the GIL for the duration,
so chunks can run on any number of threads with identical results. The
arithmetic mirrors the NumPy backend expression-for-expression.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, floor, log1p, sqrt

cdef double INF = float("inf")


# --- analytic scene distance ------------------------------------------------

cdef inline double _scene_sd(const signed char[::1] kinds,
                             const signed char[::1] ops,
                             const double[:, ::1] centers,
                             const double[:, ::1] sizes,
                             const double[:, ::1] vels,
                             double empty, double t,
                             double px, double py, double pz) noexcept nogil:
    cdef double d = empty
    cdef double dx, dy, dz, qx, qy, qz, ox, oy, oz, mx, dp
    cdef Py_ssize_t i, n = kinds.shape[0]
    for i in range(n):
        dx = px - (centers[i, 0] + vels[i, 0] * t)
        dy = py - (centers[i, 1] + vels[i, 1] * t)
        dz = pz - (centers[i, 2] + vels[i, 2] * t)
        if kinds[i] == 0:  # sphere
            dp = sqrt(dx * dx + dy * dy + dz * dz) - sizes[i, 0]
        else:  # box
            qx = fabs(dx) - sizes[i, 0]
            qy = fabs(dy) - sizes[i, 1]
            qz = fabs(dz) - sizes[i, 2]
            ox = qx if qx > 0.0 else 0.0
            oy = qy if qy > 0.0 else 0.0
            oz = qz if qz > 0.0 else 0.0
            mx = qx
            if qy > mx:
                mx = qy
            if qz > mx:
                mx = qz
            dp = sqrt(ox * ox + oy * oy + oz * oz) + (mx if mx < 0.0 else 0.0)
        if ops[i] == 0:  # union
            if dp < d:
                d = dp
        else:  # subtract
            if -dp > d:
                d = -dp
    return d


def scene_distance_chunk(const signed char[::1] kinds, const signed char[::1] ops,
                         const double[:, ::1] centers, const double[:, ::1] sizes,
                         const double[:, ::1] vels, double empty, double t,
                         const double[:, ::1] pts, Py_ssize_t s, Py_ssize_t e,
                         double[::1] out):
    cdef Py_ssize_t i
    with nogil:
        for i in range(s, e):
            out[i] = _scene_sd(kinds, ops, centers, sizes, vels, empty, t,
                               pts[i, 0], pts[i, 1], pts[i, 2])


def bake_chunk(const signed char[::1] kinds, const signed char[::1] ops,
               const double[:, ::1] centers, const double[:, ::1] sizes,
               const double[:, ::1] vels, double empty,
               double ox, double oy, double oz, double res,
               Py_ssize_t s, Py_ssize_t e, double[:, :, ::1] out):
    cdef Py_ssize_t ix, iy, iz
    cdef Py_ssize_t ny = out.shape[1], nz = out.shape[2]
    cdef double px, py, pz
    with nogil:
        for ix in range(s, e):
            px = ox + res * ix
            for iy in range(ny):
                py = oy + res * iy
                for iz in range(nz):
                    pz = oz + res * iz
                    out[ix, iy, iz] = _scene_sd(kinds, ops, centers, sizes, vels,
                                                empty, 0.0, px, py, pz)


# --- trilinear interpolation --------------------------------------------------

cdef inline double _interp(const double[:, :, ::1] v,
                           double ox, double oy, double oz, double res,
                           double px, double py, double pz) noexcept nogil:
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], nz = v.shape[2]
    cdef double ux = (px - ox) / res
    cdef double uy = (py - oy) / res
    cdef double uz = (pz - oz) / res
    if ux < 0.0:
        ux = 0.0
    elif ux > nx - 1.0:
        ux = nx - 1.0
    if uy < 0.0:
        uy = 0.0
    elif uy > ny - 1.0:
        uy = ny - 1.0
    if uz < 0.0:
        uz = 0.0
    elif uz > nz - 1.0:
        uz = nz - 1.0
    cdef Py_ssize_t ix = <Py_ssize_t>floor(ux)
    cdef Py_ssize_t iy = <Py_ssize_t>floor(uy)
    cdef Py_ssize_t iz = <Py_ssize_t>floor(uz)
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    if iz > nz - 2:
        iz = nz - 2
    cdef double fx = ux - ix, fy = uy - iy, fz = uz - iz
    cdef double v000 = v[ix, iy, iz]
    cdef double v001 = v[ix, iy, iz + 1]
    cdef double v010 = v[ix, iy + 1, iz]
    cdef double v011 = v[ix, iy + 1, iz + 1]
    cdef double v100 = v[ix + 1, iy, iz]
    cdef double v101 = v[ix + 1, iy, iz + 1]
    cdef double v110 = v[ix + 1, iy + 1, iz]
    cdef double v111 = v[ix + 1, iy + 1, iz + 1]
    cdef double c00 = v000 + fz * (v001 - v000)
    cdef double c01 = v010 + fz * (v011 - v010)
    cdef double c10 = v100 + fz * (v101 - v100)
    cdef double c11 = v110 + fz * (v111 - v110)
    cdef double c0 = c00 + fy * (c01 - c00)
    cdef double c1 = c10 + fy * (c11 - c10)
    return c0 + fx * (c1 - c0)


def esdf_sample_chunk(const double[:, :, ::1] values,
                      double ox, double oy, double oz, double res,
                      const double[:, ::1] pts, Py_ssize_t s, Py_ssize_t e,
                      double[::1] out_d, double[:, ::1] out_g,
                      unsigned char[::1] out_flag):
    cdef Py_ssize_t nx = values.shape[0], ny = values.shape[1], nz = values.shape[2]
    cdef Py_ssize_t i
    cdef double px, py, pz, ux, uy, uz, gx, gy, gz, nrm
    with nogil:
        for i in range(s, e):
            px = pts[i, 0]; py = pts[i, 1]; pz = pts[i, 2]
            ux = (px - ox) / res
            uy = (py - oy) / res
            uz = (pz - oz) / res
            out_flag[i] = (ux < 0.0 or ux > nx - 1.0 or
                           uy < 0.0 or uy > ny - 1.0 or
                           uz < 0.0 or uz > nz - 1.0)
            out_d[i] = _interp(values, ox, oy, oz, res, px, py, pz)
            gx = (_interp(values, ox, oy, oz, res, px + res, py, pz)
                  - _interp(values, ox, oy, oz, res, px - res, py, pz)) / (2.0 * res)
            gy = (_interp(values, ox, oy, oz, res, px, py + res, pz)
                  - _interp(values, ox, oy, oz, res, px, py - res, pz)) / (2.0 * res)
            gz = (_interp(values, ox, oy, oz, res, px, py, pz + res)
                  - _interp(values, ox, oy, oz, res, px, py, pz - res)) / (2.0 * res)
            nrm = sqrt(gx * gx + gy * gy + gz * gz)
            if nrm < 1e-9:
                out_g[i, 0] = 0.0; out_g[i, 1] = 0.0; out_g[i, 2] = 0.0
            else:
                out_g[i, 0] = gx / nrm; out_g[i, 1] = gy / nrm; out_g[i, 2] = gz / nrm


# --- ray/box slab interval ----------------------------------------------------

cdef inline int _box_span(double sx, double sy, double sz,
                          double dx, double dy, double dz,
                          double lox, double loy, double loz,
                          double hix, double hiy, double hiz,
                          double* t0, double* t1) noexcept nogil:
    cdef double tlo = -INF, thi = INF, ta, tb, tmp
    if dx != 0.0:
        ta = (lox - sx) / dx
        tb = (hix - sx) / dx
        if tb < ta:
            tmp = ta; ta = tb; tb = tmp
        if ta > tlo:
            tlo = ta
        if tb < thi:
            thi = tb
    elif sx < lox or sx > hix:
        return 0
    if dy != 0.0:
        ta = (loy - sy) / dy
        tb = (hiy - sy) / dy
        if tb < ta:
            tmp = ta; ta = tb; tb = tmp
        if ta > tlo:
            tlo = ta
        if tb < thi:
            thi = tb
    elif sy < loy or sy > hiy:
        return 0
    if dz != 0.0:
        ta = (loz - sz) / dz
        tb = (hiz - sz) / dz
        if tb < ta:
            tmp = ta; ta = tb; tb = tmp
        if ta > tlo:
            tlo = ta
        if tb < thi:
            thi = tb
    elif sz < loz or sz > hiz:
        return 0
    t0[0] = tlo
    t1[0] = thi
    return 1


# --- sphere tracing -------------------------------------------------------

def grid_trace_chunk(const double[:, :, ::1] values,
                     double ox, double oy, double oz, double res,
                     double sx, double sy, double sz,
                     const double[:, ::1] dirs, double max_range,
                     double eps, double step_scale,
                     Py_ssize_t s, Py_ssize_t e, double[::1] out):
    cdef Py_ssize_t nx = values.shape[0], ny = values.shape[1], nz = values.shape[2]
    cdef double hix = ox + (nx - 1) * res
    cdef double hiy = oy + (ny - 1) * res
    cdef double hiz = oz + (nz - 1) * res
    cdef Py_ssize_t i
    cdef double dx, dy, dz, t, t_end, d, t0, t1
    with nogil:
        for i in range(s, e):
            dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
            out[i] = INF
            if not _box_span(sx, sy, sz, dx, dy, dz, ox, oy, oz,
                             hix, hiy, hiz, &t0, &t1):
                continue
            t = t0 if t0 > 0.0 else 0.0
            t_end = t1 if t1 < max_range else max_range
            if t > t_end:
                continue
            while True:
                d = _interp(values, ox, oy, oz, res,
                            sx + t * dx, sy + t * dy, sz + t * dz)
                if d < eps:
                    out[i] = t
                    break
                t += step_scale * d
                if t > t_end:
                    break


def scene_trace_chunk(const signed char[::1] kinds, const signed char[::1] ops,
                      const double[:, ::1] centers, const double[:, ::1] sizes,
                      const double[:, ::1] vels, double empty, double tm,
                      double sx, double sy, double sz,
                      const double[:, ::1] dirs, double max_range,
                      double eps, double step_scale,
                      Py_ssize_t s, Py_ssize_t e, double[::1] out):
    cdef Py_ssize_t i
    cdef double dx, dy, dz, t, d
    with nogil:
        for i in range(s, e):
            dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
            out[i] = INF
            t = 0.0
            while True:
                d = _scene_sd(kinds, ops, centers, sizes, vels, empty, tm,
                              sx + t * dx, sy + t * dy, sz + t * dz)
                if d < eps:
                    out[i] = t
                    break
                t += step_scale * d
                if t > max_range:
                    break


# --- per-ray obstacle policy reduction -----------------------------------

def policy_reduce_chunk(const double[:, ::1] dirs, const double[::1] dists,
                        double vx, double vy, double vz,
                        double eta_rep, double nu_rep,
                        double eta_damp, double nu_damp,
                        double eps_p, double radius, double c,
                        double min_range, Py_ssize_t s, Py_ssize_t e,
                        double[::1] slot):
    cdef double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0
    cdef double b0 = 0, b1 = 0, b2 = 0, cnt = 0
    cdef Py_ssize_t i
    cdef double d, rx, ry, rz, toward, frep, g, fdamp, w, smag, a, bf
    with nogil:
        for i in range(s, e):
            d = dists[i]
            if d != d or d == INF or d < min_range:
                continue
            cnt += 1
            rx = -dirs[i, 0]; ry = -dirs[i, 1]; rz = -dirs[i, 2]
            toward = dirs[i, 0] * vx + dirs[i, 1] * vy + dirs[i, 2] * vz
            frep = eta_rep * exp(-d / nu_rep)
            g = toward if toward > 0.0 else 0.0
            fdamp = eta_damp / (d / nu_damp + eps_p) * g * g
            if d < radius:
                w = d * d / (radius * radius) - 2.0 * d / radius + 1.0
            else:
                w = 0.0
            smag = fdamp / (fdamp + c * log1p(exp(-2.0 * c * fdamp)))
            a = w * smag * smag
            if a != 0.0:
                a00 += a * rx * rx
                a01 += a * rx * ry
                a02 += a * rx * rz
                a11 += a * ry * ry
                a12 += a * ry * rz
                a22 += a * rz * rz
                bf = a * (frep + fdamp)
                b0 += bf * rx
                b1 += bf * ry
                b2 += bf * rz
    slot[0] = a00; slot[1] = a01; slot[2] = a02
    slot[3] = a01; slot[4] = a11; slot[5] = a12
    slot[6] = a02; slot[7] = a12; slot[8] = a22
    slot[9] = b0; slot[10] = b1; slot[11] = b2
    slot[12] = cnt

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense-field kernels: bilinear warping, IDW densification, block matching.

Mirrors motioncond.kernels.reference function-for-function; results agree with
the reference backend to floating-point reassociation tolerance.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _clampd(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline Py_ssize_t _clampi(Py_ssize_t v, Py_ssize_t lo, Py_ssize_t hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def bilinear_map(field, xs, ys):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] f = np.ascontiguousarray(field, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t h = f.shape[0], w = f.shape[1], c = f.shape[2], n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, c), dtype=np.float64)
    cdef Py_ssize_t i, k, x0, y0, x1, y1
    cdef double px, py, fx, fy, top, bot
    with nogil:
        for i in range(n):
            px = _clampd(x[i], 0.0, w - 1.0)
            py = _clampd(y[i], 0.0, h - 1.0)
            x0 = <Py_ssize_t>px
            y0 = <Py_ssize_t>py
            if x0 > w - 2:
                x0 = w - 1 if w == 1 else w - 2
            if y0 > h - 2:
                y0 = h - 1 if h == 1 else h - 2
            x1 = _clampi(x0 + 1, 0, w - 1)
            y1 = _clampi(y0 + 1, 0, h - 1)
            fx = px - x0
            fy = py - y0
            for k in range(c):
                top = f[y0, x0, k] * (1.0 - fx) + f[y0, x1, k] * fx
                bot = f[y1, x0, k] * (1.0 - fx) + f[y1, x1, k] * fx
                out[i, k] = top * (1.0 - fy) + bot * fy
    return out


def backward_warp(image, flow):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] img = np.ascontiguousarray(image, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] flo = np.ascontiguousarray(flow, dtype=np.float64)
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], c = img.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.empty((h, w, c), dtype=np.float64)
    cdef Py_ssize_t gy, gx, k, x0, y0, x1, y1
    cdef double px, py, fx, fy, top, bot
    with nogil:
        for gy in range(h):
            for gx in range(w):
                px = _clampd(gx - flo[gy, gx, 0], 0.0, w - 1.0)
                py = _clampd(gy - flo[gy, gx, 1], 0.0, h - 1.0)
                x0 = <Py_ssize_t>px
                y0 = <Py_ssize_t>py
                if x0 > w - 2:
                    x0 = w - 1 if w == 1 else w - 2
                if y0 > h - 2:
                    y0 = h - 1 if h == 1 else h - 2
                x1 = _clampi(x0 + 1, 0, w - 1)
                y1 = _clampi(y0 + 1, 0, h - 1)
                fx = px - x0
                fy = py - y0
                for k in range(c):
                    top = img[y0, x0, k] * (1.0 - fx) + img[y0, x1, k] * fx
                    bot = img[y1, x0, k] * (1.0 - fx) + img[y1, x1, k] * fx
                    out[gy, gx, k] = top * (1.0 - fy) + bot * fy
    return out


def idw_densify(site_x, site_y, site_vals, mask, double power):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sx = np.ascontiguousarray(site_x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sy = np.ascontiguousarray(site_y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sv = np.ascontiguousarray(site_vals, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1], s = sx.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.zeros((h, w, 2), dtype=np.float64)
    if s == 0:
        return out
    cdef Py_ssize_t gy, gx, j, hit
    cdef double dx, dy, d2, wgt, wsum, n0, n1
    with nogil:
        for gy in range(h):
            for gx in range(w):
                if m[gy, gx] == 0:
                    continue
                wsum = 0.0
                n0 = 0.0
                n1 = 0.0
                hit = -1
                for j in range(s):
                    dx = gx - sx[j]
                    dy = gy - sy[j]
                    d2 = dx * dx + dy * dy
                    if d2 <= 0.0:
                        hit = j
                        break
                    wgt = d2 ** (-power / 2.0)
                    wsum += wgt
                    n0 += wgt * sv[j, 0]
                    n1 += wgt * sv[j, 1]
                if hit >= 0:
                    out[gy, gx, 0] = sv[hit, 0]
                    out[gy, gx, 1] = sv[hit, 1]
                else:
                    out[gy, gx, 0] = n0 / wsum
                    out[gy, gx, 1] = n1 / wsum
    return out


def block_match(template, frame, Py_ssize_t cx, Py_ssize_t cy, Py_ssize_t radius):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] t = np.ascontiguousarray(template, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] f = np.ascontiguousarray(frame, dtype=np.float64)
    cdef Py_ssize_t p = t.shape[0], c = t.shape[2], half = p // 2
    cdef Py_ssize_t h = f.shape[0], w = f.shape[1]
    cdef Py_ssize_t dx, dy, i, j, k, x, y, ry, rx
    cdef double cost, diff, best_cost = 0.0
    cdef Py_ssize_t best_x = cx, best_y = cy, best_d2 = 0, best_dy = 0, best_dx = 0, d2
    cdef bint have = 0, better
    with nogil:
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                x = cx + dx
                y = cy + dy
                cost = 0.0
                for i in range(p):
                    ry = _clampi(y - half + i, 0, h - 1)
                    for j in range(p):
                        rx = _clampi(x - half + j, 0, w - 1)
                        for k in range(c):
                            diff = f[ry, rx, k] - t[i, j, k]
                            cost += diff * diff
                d2 = dx * dx + dy * dy
                if not have:
                    better = 1
                elif cost != best_cost:
                    better = cost < best_cost
                elif d2 != best_d2:
                    better = d2 < best_d2
                elif dy != best_dy:
                    better = dy < best_dy
                else:
                    better = dx < best_dx
                if better:
                    have = 1
                    best_cost = cost
                    best_x = x
                    best_y = y
                    best_d2 = d2
                    best_dy = dy
                    best_dx = dx
    return best_x, best_y, best_cost

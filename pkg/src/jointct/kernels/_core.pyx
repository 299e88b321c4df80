# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled assembly kernels: circular-arc tracing and exact line-pixel
chord traversal.  Semantics match ``jointct.kernels._pure``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, cos, fabs, sin

cnp.import_array()

BACKEND = "compiled"


def trace_arc(double cx, double cy, double r, double phi0, double phi1,
              double max_step, double x1_min, double x2_min,
              double dx1, double dx2, Py_ssize_t n1, Py_ssize_t n2):
    cdef Py_ssize_t n, k, i, j, m
    cdef double dphi, phi, px, py, w
    cdef cnp.int64_t flat, last
    if phi1 <= phi0:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    n = <Py_ssize_t>ceil(r * (phi1 - phi0) / max_step)
    if n < 1:
        n = 1
    dphi = (phi1 - phi0) / n
    w = r * dphi

    idx_arr = np.empty(n, np.int64)
    w_arr = np.empty(n, np.float64)
    cdef cnp.int64_t[:] idx = idx_arr
    cdef double[:] wv = w_arr

    m = 0
    last = -1
    for k in range(n):
        phi = phi0 + (k + 0.5) * dphi
        px = cx + r * cos(phi)
        py = cy + r * sin(phi)
        i = <Py_ssize_t>((px - x1_min) / dx1)
        j = <Py_ssize_t>((py - x2_min) / dx2)
        if px < x1_min or py < x2_min or i >= n1 or j >= n2:
            last = -1
            continue
        flat = j * n1 + i
        if flat == last:
            wv[m - 1] += w
        else:
            idx[m] = flat
            wv[m] = w
            m += 1
            last = flat
    # Re-entries into the same pixel leave duplicate indices; the caller
    # aggregates through COO summation, so return run-length output as is.
    return idx_arr[:m], w_arr[:m]


def line_chords(double px, double py, double dx, double dy,
                double x1_min, double x2_min, double dx1, double dx2,
                Py_ssize_t n1, Py_ssize_t n2):
    cdef double x1_max = x1_min + n1 * dx1
    cdef double x2_max = x2_min + n2 * dx2
    cdef double t_lo = -1e300, t_hi = 1e300
    cdef double ta, tb, t, t_next, dt, mx, my, eps
    cdef Py_ssize_t i, j, m, cap
    cdef double tx_next, ty_next

    if fabs(dx) < 1e-300:
        if px < x1_min or px > x1_max:
            return np.empty(0, np.int64), np.empty(0, np.float64)
    else:
        ta = (x1_min - px) / dx
        tb = (x1_max - px) / dx
        t_lo = min(ta, tb)
        t_hi = max(ta, tb)
    if fabs(dy) < 1e-300:
        if py < x2_min or py > x2_max:
            return np.empty(0, np.int64), np.empty(0, np.float64)
    else:
        ta = (x2_min - py) / dy
        tb = (x2_max - py) / dy
        if min(ta, tb) > t_lo:
            t_lo = min(ta, tb)
        if max(ta, tb) < t_hi:
            t_hi = max(ta, tb)
    if t_hi <= t_lo:
        return np.empty(0, np.int64), np.empty(0, np.float64)

    cap = n1 + n2 + 4
    idx_arr = np.empty(cap, np.int64)
    w_arr = np.empty(cap, np.float64)
    cdef cnp.int64_t[:] idx = idx_arr
    cdef double[:] wv = w_arr

    # Siddon-style march: next crossing of a vertical / horizontal grid line.
    t = t_lo
    m = 0
    eps = 1e-12 * (t_hi - t_lo)
    while t < t_hi - eps:
        # pixel containing the point just after t
        mx = px + (t + eps) * dx
        my = py + (t + eps) * dy
        i = <Py_ssize_t>((mx - x1_min) / dx1)
        j = <Py_ssize_t>((my - x2_min) / dx2)
        if i < 0:
            i = 0
        if i > n1 - 1:
            i = n1 - 1
        if j < 0:
            j = 0
        if j > n2 - 1:
            j = n2 - 1
        # exit parameter of this pixel
        t_next = t_hi
        if dx > 1e-300:
            tx_next = (x1_min + (i + 1) * dx1 - px) / dx
            if tx_next < t_next:
                t_next = tx_next
        elif dx < -1e-300:
            tx_next = (x1_min + i * dx1 - px) / dx
            if tx_next < t_next:
                t_next = tx_next
        if dy > 1e-300:
            ty_next = (x2_min + (j + 1) * dx2 - py) / dy
            if ty_next < t_next:
                t_next = ty_next
        elif dy < -1e-300:
            ty_next = (x2_min + j * dx2 - py) / dy
            if ty_next < t_next:
                t_next = ty_next
        if t_next <= t + eps:
            t_next = t + eps
        dt = t_next - t
        if dt > 0 and m < cap:
            idx[m] = j * n1 + i
            wv[m] = dt
            m += 1
        t = t_next
    return idx_arr[:m], w_arr[:m]

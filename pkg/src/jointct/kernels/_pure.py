"""Pure-numpy implementations of the hot assembly kernels.

These mirror ``jointct.kernels._core`` (the compiled extension) entry
point for entry point and are selected automatically when the extension
is unavailable or when JOINTCT_PURE_PYTHON=1.
"""

import numpy as np

BACKEND = "pure-python"


def trace_arc(cx, cy, r, phi0, phi1, max_step,
              x1_min, x2_min, dx1, dx2, n1, n2):
    """Arc-length weights of the circular arc (cx,cy,r), phi in
    [phi0, phi1], deposited on the pixel containing each sub-arc
    midpoint.  Sub-arc step is at most max_step in length.

    Returns (flat_pixel_indices, weights), duplicates already summed.
    """
    if phi1 <= phi0:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    n = max(1, int(np.ceil(r * (phi1 - phi0) / max_step)))
    dphi = (phi1 - phi0) / n
    phi_mid = phi0 + (np.arange(n) + 0.5) * dphi
    px = cx + r * np.cos(phi_mid)
    py = cy + r * np.sin(phi_mid)
    i = np.floor((px - x1_min) / dx1).astype(np.int64)
    j = np.floor((py - x2_min) / dx2).astype(np.int64)
    inside = (i >= 0) & (i < n1) & (j >= 0) & (j < n2)
    if not inside.any():
        return np.empty(0, np.int64), np.empty(0, np.float64)
    flat = j[inside] * n1 + i[inside]
    uniq, inv = np.unique(flat, return_inverse=True)
    w = np.bincount(inv, minlength=uniq.size) * (r * dphi)
    return uniq, w


def line_chords(px, py, dx, dy,
                x1_min, x2_min, dx1, dx2, n1, n2):
    """Exact chord lengths of the line through (px,py) with unit
    direction (dx,dy) across every pixel it traverses.

    Returns (flat_pixel_indices, weights).
    """
    x1_max = x1_min + n1 * dx1
    x2_max = x2_min + n2 * dx2
    # parameter range where the line is inside the bounding box
    t_lo, t_hi = -np.inf, np.inf
    for p, d, lo, hi in ((px, dx, x1_min, x1_max), (py, dy, x2_min, x2_max)):
        if abs(d) < 1e-300:
            if not (lo <= p <= hi):
                return np.empty(0, np.int64), np.empty(0, np.float64)
        else:
            ta, tb = (lo - p) / d, (hi - p) / d
            t_lo = max(t_lo, min(ta, tb))
            t_hi = min(t_hi, max(ta, tb))
    if t_hi <= t_lo:
        return np.empty(0, np.int64), np.empty(0, np.float64)

    ts = [np.array([t_lo, t_hi])]
    if abs(dx) > 1e-300:
        k = np.arange(n1 + 1)
        ts.append((x1_min + k * dx1 - px) / dx)
    if abs(dy) > 1e-300:
        k = np.arange(n2 + 1)
        ts.append((x2_min + k * dx2 - py) / dy)
    t = np.concatenate(ts)
    t = np.unique(t[(t >= t_lo) & (t <= t_hi)])
    if t.size < 2:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    tm = 0.5 * (t[1:] + t[:-1])
    w = np.diff(t)
    i = np.floor((px + tm * dx - x1_min) / dx1).astype(np.int64)
    j = np.floor((py + tm * dy - x2_min) / dx2).astype(np.int64)
    inside = (i >= 0) & (i < n1) & (j >= 0) & (j < n2) & (w > 0)
    if not inside.any():
        return np.empty(0, np.int64), np.empty(0, np.float64)
    return j[inside] * n1 + i[inside], w[inside]

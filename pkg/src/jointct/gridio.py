"""File formats for images, sinograms and point lists.

Grid files are a single ASCII header line
``n1 n2 x1_min x1_max x2_min x2_max`` followed by the n2 x n1 values as
little-endian float64 in C order.  Point lists are plain text, one
``x1 x2`` pair per line.  Rendering writes binary PGM/PPM, which any
image viewer opens.
"""

from __future__ import annotations

import numpy as np

from .geometry import ImageGrid
from .operators import Image

__all__ = [
    "save_grid",
    "load_grid",
    "save_points",
    "load_points",
    "render_pgm",
    "render_overlay_ppm",
]


def save_grid(image: Image, path):
    g = image.grid
    vals = np.ascontiguousarray(image.values, dtype="<f8")
    if vals.shape != (g.n2, g.n1):
        raise ValueError("value shape does not match the grid")
    with open(path, "wb") as fh:
        header = (
            f"{g.n1} {g.n2} {float(g.x1_min)!r} {float(g.x1_max)!r}"
            f" {float(g.x2_min)!r} {float(g.x2_max)!r}\n"
        )
        fh.write(header.encode("ascii"))
        fh.write(vals.tobytes())


def load_grid(path) -> Image:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 6:
            raise ValueError("malformed grid header")
        n1, n2 = int(header[0]), int(header[1])
        x1_min, x1_max, x2_min, x2_max = (float(t) for t in header[2:])
        raw = fh.read(8 * n1 * n2)
    if len(raw) != 8 * n1 * n2:
        raise ValueError("truncated grid payload")
    vals = np.frombuffer(raw, dtype="<f8").reshape(n2, n1).copy()
    return Image(ImageGrid(x1_min, x1_max, x2_min, x2_max, n1, n2), vals)


def save_points(points, path):
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.size and pts.shape[1] != 2:
        raise ValueError("points must be (n, 2)")
    with open(path, "w") as fh:
        for x1, x2 in pts:
            fh.write(f"{float(x1)!r} {float(x2)!r}\n")


def load_points(path):
    pts = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                a, b = line.split()
                pts.append((float(a), float(b)))
    return np.array(pts, float).reshape(-1, 2)


def _to_bytes(values, vmin, vmax):
    v = np.asarray(values, float)
    if vmin is None:
        vmin = v.min()
    if vmax is None:
        vmax = v.max()
    if vmax <= vmin:
        return np.zeros(v.shape, np.uint8)
    scaled = np.clip((v - vmin) / (vmax - vmin), 0.0, 1.0)
    return (scaled * 255.0 + 0.5).astype(np.uint8)


def render_pgm(image: Image, path, vmin=None, vmax=None):
    """Grayscale render; row order flipped so x2 increases upward."""
    pix = _to_bytes(image.values, vmin, vmax)[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def render_overlay_ppm(image: Image, points, path, vmin=None, vmax=None):
    """Grayscale render with the given world-coordinate points drawn in
    red, typically a predicted artifact curve on a reconstruction."""
    g = image.grid
    base = _to_bytes(image.values, vmin, vmax)
    rgb = np.stack([base] * 3, axis=-1)
    for x1, x2 in np.atleast_2d(np.asarray(points, float)).reshape(-1, 2):
        i = int(np.floor((x1 - g.x1_min) / g.dx1))
        j = int(np.floor((x2 - g.x2_min) / g.dx2))
        if 0 <= i < g.n1 and 0 <= j < g.n2:
            rgb[j, i] = (255, 0, 0)
    rgb = rgb[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{g.n1} {g.n2}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())

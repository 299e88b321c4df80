"""Test phantoms, the material table, and the density-attenuation fit.

Each phantom is a paired (electron density, attenuation) image built
from the same region masks, so the two images share support and edges
by construction.  Shape placements are pinned in versioned description
files under ``data/``; material values live in ``data/materials.csv``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .geometry import ImageGrid
from .operators import Image

__all__ = [
    "Material",
    "PhantomPair",
    "load_materials",
    "simple_phantom",
    "complex_phantom",
    "bar_phantom",
    "phantom_by_name",
    "randomize_materials",
    "fit_nu",
]


@dataclass(frozen=True)
class Material:
    name: str
    n_e: float
    mu_100keV: float

    def __post_init__(self):
        if self.n_e < 0 or self.mu_100keV < 0:
            raise ValueError("material values must be nonnegative")


@dataclass
class PhantomPair:
    grid: ImageGrid
    n_e: Image
    mu_E: Image
    region_labels: np.ndarray  # int mask, 0 = background
    materials: tuple  # material per region slot, index = label - 1


def load_materials(path=None):
    """Material table from a CSV with header name,n_e,mu_100keV."""
    if path is None:
        src = resources.files("jointct.data").joinpath("materials.csv")
        fh = src.open("r")
    else:
        fh = open(path)
    with fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("empty material table")
    return [Material(r["name"], float(r["n_e"]), float(r["mu_100keV"])) for r in rows]


def _material_by_name(table, name):
    for m in table:
        if m.name == name:
            return m
    raise KeyError(f"unknown material {name!r}")


def _parse_shape_file(text):
    shapes = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = dict(tok.split("=", 1) for tok in line.split())
        shape = {"shape": fields.pop("shape"), "material": fields.pop("material")}
        shape.update({k: float(v) for k, v in fields.items()})
        shapes.append(shape)
    return shapes


def _shape_mask(shape, X1, X2, grid):
    kind = shape["shape"]
    if kind == "rect":
        return (np.abs(X1 - shape["cx"]) <= shape["hx"]) & (
            np.abs(X2 - shape["cy"]) <= shape["hy"]
        )
    if kind == "disc":
        return (X1 - shape["cx"]) ** 2 + (X2 - shape["cy"]) ** 2 <= shape["r"] ** 2
    if kind == "ellipse":
        return ((X1 - shape["cx"]) / shape["ax"]) ** 2 + (
            (X2 - shape["cy"]) / shape["ay"]
        ) ** 2 <= 1.0
    if kind == "triangle":
        pts = [(shape[f"x{i}"], shape[f"y{i}"]) for i in (1, 2, 3)]
        mask = np.ones_like(X1, dtype=bool)
        for (ax, ay), (bx, by) in zip(pts, pts[1:] + pts[:1]):
            cross = (bx - ax) * (X2 - ay) - (by - ay) * (X1 - ax)
            mask &= cross >= 0
        return mask
    if kind == "cross":
        # stroke width is pinned in length units (>= 3 pixels at 200x200)
        half = max(shape["stroke"], 3.0 * max(grid.dx1, grid.dx2)) / 2.0
        horiz = (np.abs(X1 - shape["cx"]) <= shape["arm"]) & (
            np.abs(X2 - shape["cy"]) <= half
        )
        vert = (np.abs(X2 - shape["cy"]) <= shape["arm"]) & (
            np.abs(X1 - shape["cx"]) <= half
        )
        return horiz | vert
    raise ValueError(f"unknown shape {kind!r}")


def _build_pair(grid, shapes, table):
    X1, X2 = grid.meshgrid()
    labels = np.zeros((grid.n2, grid.n1), dtype=int)
    mats = []
    for slot, shape in enumerate(shapes, start=1):
        mask = _shape_mask(shape, X1, X2, grid)
        labels[mask] = slot
        mats.append(_material_by_name(table, shape["material"]))
    air = _material_by_name(table, "dry_air")
    ne = np.full(labels.shape, air.n_e)
    mu = np.full(labels.shape, air.mu_100keV)
    for slot, mat in enumerate(mats, start=1):
        ne[labels == slot] = mat.n_e
        mu[labels == slot] = mat.mu_100keV
    return PhantomPair(grid, Image(grid, ne), Image(grid, mu), labels, tuple(mats))


def _from_description(grid, filename, table):
    if table is None:
        table = load_materials()
    text = resources.files("jointct.data").joinpath(filename).read_text()
    return _build_pair(grid, _parse_shape_file(text), table)


def simple_phantom(grid: ImageGrid, table=None) -> PhantomPair:
    """Rectangle (PVC) plus disc (aluminium), density ratio about 1:2."""
    return _from_description(grid, "phantom_simple.txt", table)


def complex_phantom(grid: ImageGrid, table=None) -> PhantomPair:
    """Water ellipse, sulfur ellipse, CaSO4 right triangle and a thin
    TiO2 cross; density ratios about 1:2:3:4."""
    return _from_description(grid, "phantom_complex.txt", table)


def bar_phantom(grid: ImageGrid, table=None) -> PhantomPair:
    """Horizontal aluminium bar near the bottom of the scan region."""
    return _from_description(grid, "phantom_bar.txt", table)


def phantom_by_name(name, grid, table=None) -> PhantomPair:
    builders = {"simple": simple_phantom, "complex": complex_phantom, "bar": bar_phantom}
    try:
        return builders[name](grid, table)
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}") from None


def randomize_materials(p: PhantomPair, table, seed) -> PhantomPair:
    """Reassign every nonzero region a uniformly drawn material (paired
    n_e / attenuation values from one table row); background unchanged."""
    candidates = [m for m in table if m.name != "dry_air"]
    if not candidates:
        raise ValueError("empty material table")
    rng = np.random.default_rng(seed)
    picks = [candidates[rng.integers(len(candidates))] for _ in p.materials]
    ne = p.n_e.values.copy()
    mu = p.mu_E.values.copy()
    for slot, mat in enumerate(picks, start=1):
        region = p.region_labels == slot
        ne[region] = mat.n_e
        mu[region] = mat.mu_100keV
    return PhantomPair(p.grid, Image(p.grid, ne), Image(p.grid, mu),
                       p.region_labels, tuple(picks))


def fit_nu(table, outlier_threshold=3.0):
    """Through-origin least-squares slope of attenuation against
    electron density.

    Near-origin rows (both values under 1% of the table maximum) are
    dropped first; then rows are removed one at a time while the worst
    externally studentized residual exceeds the threshold.
    """
    if len(table) < 3:
        raise ValueError("need at least 3 materials")
    n = np.array([m.n_e for m in table], float)
    mu = np.array([m.mu_100keV for m in table], float)
    keep = ~((n < 0.01 * n.max()) & (mu < 0.01 * mu.max()))
    n, mu = n[keep], mu[keep]
    if n.size < 3 or not np.any(n):
        raise ValueError("degenerate table")
    while True:
        slope = float(np.dot(mu, n) / np.dot(n, n))
        resid = mu - slope * n
        if n.size <= 3:
            break
        # externally studentized: each residual against the spread of the rest
        idx = np.arange(n.size)
        t = np.empty(n.size)
        for i in idx:
            others = resid[idx != i]
            sd = others.std(ddof=1)
            t[i] = abs(resid[i]) / sd if sd > 0 else np.inf
        worst = int(np.argmax(t))
        if t[worst] <= outlier_threshold:
            break
        n = np.delete(n, worst)
        mu = np.delete(mu, worst)
    return slope

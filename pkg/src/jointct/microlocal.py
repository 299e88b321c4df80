"""Analytic artifact prediction for the two-circle scatter transform.

A wavefront element (x, xi) with xi_2 != 0 is conormal to exactly one
circle centered on the line x2 = 2.  Because each toric section carries
two such circles, backprojection maps each element either back to
itself or to a mirrored element on the other circle branch; the latter
produce the nonlocal artifacts computed here, together with the visible
cones of both modalities and their joint coverage map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import CENTER_LINE_HEIGHT, ImageGrid, ScannerConfig
from .operators import Image, beta_max_scalar

__all__ = [
    "Covector",
    "CircleData",
    "circle_from_covector",
    "beta_max",
    "compton_visible",
    "xray_visible_cone",
    "visibility_map",
    "lambda12",
    "lambda21",
    "artifact_support_sets",
    "lambda_curve_points",
]


@dataclass(frozen=True)
class Covector:
    """Point-direction pair (x, xi); xi need not be unit length."""

    x: tuple
    xi: tuple

    def __post_init__(self):
        if self.xi[0] == 0 and self.xi[1] == 0:
            raise ValueError("xi must be nonzero")

    @property
    def in_visible_set(self):
        return self.xi[1] != 0


@dataclass(frozen=True)
class CircleData:
    """Circle conormal to a covector: center (c, 2), radius r,
    branch offsets x0_1 / x0_2 and phase scale sigma."""

    c: float
    r: float
    s: float
    x0_1: float
    x0_2: float
    sigma: float


def circle_from_covector(cv: Covector) -> CircleData:
    """Circle data of the unique circle centered on x2 = 2 conormal to
    the covector.  Requires xi_2 != 0, x2 < 1 and radius > 1."""
    x1, x2 = cv.x
    xi1, xi2 = cv.xi
    if xi2 == 0:
        raise ValueError("xi_2 = 0: invisible direction")
    if x2 >= 1.0:
        raise ValueError("point outside the scan region")
    h = CENTER_LINE_HEIGHT - x2
    c = x1 - xi1 * (x2 - CENTER_LINE_HEIGHT) / xi2
    r = h * math.hypot(xi1, xi2) / abs(xi2)
    if r <= 1.0:
        raise ValueError("degenerate circle (r <= 1)")
    s = math.sqrt(r * r - 1.0)
    base = x1 + xi1 * h / xi2
    return CircleData(
        c=c, r=r, s=s,
        x0_1=base + s, x0_2=base - s,
        sigma=-xi2 / h,
    )


def beta_max(x2, r_M):
    """Half-opening angle (from vertical) of the scatter-visible cone
    at depth x2, arctan(sqrt(r_M^2/(2-x2)^2 - 1))."""
    return beta_max_scalar(x2, r_M)


def compton_visible(x, beta, cfg: ScannerConfig):
    """Whether the direction at signed angle beta from vertical is
    normal to a measured circle at x.

    The circle is unique: its center sits at x + r(sin beta, cos beta)
    on the center line, so r = (2 - x2)/cos(beta).  Visibility requires
    r < r_M and the circle-pair offset x0 of one of the two branches to
    fall inside the detector window (-a, a).  Vectorized over beta."""
    x1, x2 = x
    h = CENTER_LINE_HEIGHT - x2
    if h <= 0:
        raise ValueError("point outside the scan region")
    beta = np.asarray(beta, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = h / np.cos(beta)
        ok = (np.abs(beta) < math.pi / 2) & (r < cfg.r_M)
        s = np.sqrt(np.where(ok, r * r - 1.0, 1.0))
        cx = x1 + h * np.tan(beta)
        window = (np.abs(cx + s) < cfg.a) | (np.abs(cx - s) < cfg.a)
    return ok & window


def xray_visible_cone(x, cfg: ScannerConfig):
    """Interval (alpha_lo, alpha_hi) of visible normal angles, measured
    from the x1-axis, of data-set lines through x; None when empty."""
    x1, x2 = x
    if not (-5.0 < x2 < 3.0):
        raise ValueError("point must lie strictly between the arrays")
    # tan(alpha) ranges admitting a hit on the source / detector segment
    lo = max((x1 - cfg.a) / (3.0 - x2), (-cfg.a - x1) / (x2 + 5.0))
    hi = min((x1 + cfg.a) / (3.0 - x2), (cfg.a - x1) / (x2 + 5.0))
    if lo >= hi:
        return None
    return (math.atan(lo), math.atan(hi))


def visibility_map(img: ImageGrid, cfg: ScannerConfig, n_dirs=720) -> Image:
    """Fraction of the unit circle covered by the union of the X-ray
    and scatter visible cones, per pixel."""
    # Directions sampled on half the circle; both cones are symmetric
    # under xi -> -xi.
    gamma = math.pi * (np.arange(n_dirs // 2) + 0.5) / (n_dirs // 2)
    tan_from_horiz = np.tan(np.where(gamma > math.pi / 2, gamma - math.pi, gamma))
    # signed angle from vertical in (-pi/2, pi/2)
    from_vertical = math.pi / 2 - gamma
    out = np.zeros((img.n2, img.n1))
    for j, x2 in enumerate(img.x2_centers):
        reachable = 0.0 < CENTER_LINE_HEIGHT - x2 < cfg.r_M
        for i, x1 in enumerate(img.x1_centers):
            if reachable:
                compton = compton_visible((x1, x2), from_vertical, cfg)
            else:
                compton = np.zeros(gamma.size, bool)
            cone = xray_visible_cone((x1, x2), cfg)
            if cone is None:
                xray = np.zeros_like(compton)
            else:
                lo, hi = math.tan(cone[0]), math.tan(cone[1])
                xray = (tan_from_horiz > lo) & (tan_from_horiz < hi)
            out[j, i] = np.count_nonzero(compton | xray) / compton.size
    return Image(img, out)


def _lambda_map(x, xi, source_branch):
    """Shared body of the two artifact maps.

    ``source_branch`` = 1 computes the branch-1 -> branch-2 map;
    2 computes the reverse.  Returns (point, unit eta, magnitude) or
    None where undefined.
    """
    x1, x2 = x
    xi1, xi2 = xi
    if xi2 == 0:
        raise ValueError("covector not in the visible set")
    h = CENTER_LINE_HEIGHT - x2
    if h <= 0:
        raise ValueError("point outside the scan region")
    r2 = h * h * (xi1 * xi1 + xi2 * xi2) / (xi2 * xi2)
    if r2 <= 1.0:
        return None
    s = math.sqrt(r2 - 1.0)
    base = x1 + xi1 * h / xi2
    if source_branch == 1:
        x0 = base + s
        denom = 2.0 * (x1 - x0) + s
        if denom == 0:
            return None
        y1 = s * (x1 - x0) / denom + x0
        under = r2 - (y1 - (x0 + s)) ** 2
        if under < 0:
            return None
        y2 = CENTER_LINE_HEIGHT - math.sqrt(under)
        target_center = x0 + s  # branch-2 circle center abscissa
        mag = -2.0 * xi1 - s * xi2 / h
    else:
        x0 = base - s
        denom = -2.0 * (x1 - x0) + s
        if denom == 0:
            return None
        y1 = s * (x1 - x0) / denom + x0
        under = s * s + 1.0 - (y1 - (x0 - s)) ** 2
        if under < 0:
            return None
        y2 = CENTER_LINE_HEIGHT - math.sqrt(under)
        target_center = x0 - s  # branch-1 circle center abscissa
        mag = 2.0 * xi1 - s * xi2 / h
    vec = np.array([y1 - target_center, y2 - CENTER_LINE_HEIGHT])
    norm = np.linalg.norm(vec)
    if norm == 0 or mag == 0:
        return None
    # covectors scale positively, so the factor's sign stays on eta
    eta = math.copysign(1.0, mag) * vec / norm
    return (y1, y2), (eta[0], eta[1]), abs(mag) * norm


def lambda12(cv: Covector) -> Optional[Covector]:
    """Nonlocal artifact covector generated on the second circle branch
    by a wavefront element seen through the first; None if undefined."""
    res = _lambda_map(cv.x, cv.xi, source_branch=1)
    if res is None:
        return None
    y, eta, _ = res
    return Covector(y, eta)


def lambda21(cv: Covector) -> Optional[Covector]:
    """Reverse artifact map, second branch to first."""
    res = _lambda_map(cv.x, cv.xi, source_branch=2)
    if res is None:
        return None
    y, eta, _ = res
    return Covector(y, eta)


def lambda_magnitude(cv: Covector, source_branch=1):
    """Artifact covector magnitude (the scale dropped from the unit eta
    returned by the lambda maps)."""
    res = _lambda_map(cv.x, cv.xi, source_branch)
    return None if res is None else res[2]


def lambda_curve_points(y, cfg: ScannerConfig, n_dirs=720, img: ImageGrid = None):
    """Base points of both artifact maps applied to every direction at
    y.  Returns an (n, 2) array; when a grid is given the points are
    restricted to it and to the scan region x2 < 1, where backprojected
    artifacts can actually appear."""
    pts = []
    for k in range(n_dirs):
        ang = 2 * math.pi * (k + 0.5) / n_dirs
        xi = (math.cos(ang), math.sin(ang))
        if xi[1] == 0:
            continue
        cv = Covector(tuple(y), xi)
        for fn in (lambda12, lambda21):
            try:
                res = fn(cv)
            except ValueError:
                continue
            if res is None:
                continue
            # keep only artifacts reachable with the bounded radius
            try:
                circ = circle_from_covector(cv)
            except ValueError:
                continue
            if circ.r > cfg.r_M:
                continue
            pts.append(res.x)
    pts = np.array(pts) if pts else np.empty((0, 2))
    if img is not None and pts.size:
        keep = (
            (pts[:, 0] >= img.x1_min) & (pts[:, 0] <= img.x1_max)
            & (pts[:, 1] >= img.x2_min) & (pts[:, 1] <= img.x2_max)
            & (pts[:, 1] < 1.0)
        )
        pts = pts[keep]
    return pts


def artifact_support_sets(y, img: ImageGrid, cfg: ScannerConfig,
                          n_beta=2000, tol=None):
    """Boolean masks of the two cross-branch artifact support sets for
    a point singularity at y, returned as a pair of Images.

    The first mask holds points x on the first circle branch whose
    mirrored second branch passes through y; the second mask is the
    opposite pairing.  Pixel x is marked when some beta in
    [-beta_m(x), beta_m(x)] puts y on the mirrored branch; existence is
    decided by a sign change of the circle residual over a beta grid or
    by the residual minimum falling below tol.
    """
    y1, y2 = y
    if tol is None:
        tol = 0.75 * img.pixel_diag
    masks = [np.zeros((img.n2, img.n1), dtype=bool) for _ in range(2)]
    x1c = img.x1_centers
    for j, x2 in enumerate(img.x2_centers):
        h = CENTER_LINE_HEIGHT - x2
        if not (0 < h < cfg.r_M) or x2 >= 1.0:
            continue
        bm = beta_max_scalar(x2, cfg.r_M)
        beta = np.linspace(-bm, bm, n_beta)
        r = h / np.cos(beta)
        s = np.sqrt(r * r - 1.0)
        rs = r * np.sin(beta)
        for mask, (sign, mirror) in zip(masks, ((1.0, 1.0), (-1.0, -1.0))):
            # sign=+1: x on branch 1, y tested on branch 2 (and vice versa)
            x0 = x1c[:, None] + sign * s[None, :] + rs[None, :]
            cx = x0 + mirror * s[None, :]
            resid = np.hypot(y1 - cx, y2 - CENTER_LINE_HEIGHT) - r[None, :]
            hit = np.abs(resid).min(axis=1) < tol
            sign_change = np.any(resid[:, 1:] * resid[:, :-1] < 0, axis=1)
            mask[j, :] |= hit | sign_change
    return Image(img, masks[0]), Image(img, masks[1])

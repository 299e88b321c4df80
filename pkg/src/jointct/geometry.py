"""Scanner geometry, coordinate conventions and discretization grids.

The scanner consists of a horizontal source segment S above the scan
region and a horizontal transmission-detector segment D_A below it.
Scatter integration manifolds are pairs of equal-radius circles with
centers mirrored on the horizontal line x2 = 2.  All objects here are
immutable and shared freely between the other modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ScannerConfig",
    "ImageGrid",
    "ToricSinogramGrid",
    "LineSinogramGrid",
    "line_from_params",
    "in_H",
    "segment_circle_params",
    "default_image_grid",
    "extended_image_grid",
    "default_toric_grid",
    "default_line_grid",
    "load_config",
]

CENTER_LINE_HEIGHT = 2.0
SOURCE_HEIGHT = 3.0
DETECTOR_HEIGHT = -5.0


@dataclass(frozen=True)
class ScannerConfig:
    """Scanner constants: array half-width and toric radius bounds.

    The source segment S runs from (-a, 3) to (a, 3), the transmission
    detector segment D_A from (-a, -5) to (a, -5).  Circle centers lie
    on x2 = 2; the scan region is ``{2 - r_m < x2 < 1}``.
    """

    a: float = 4.0
    r_m: float = 7.0
    r_M: float = 9.0

    def __post_init__(self):
        if not (self.r_M > self.r_m > 1.0):
            raise ValueError("require r_M > r_m > 1")
        if self.a <= 0:
            raise ValueError("require a > 0")

    @property
    def source_line(self):
        return (np.array([-self.a, SOURCE_HEIGHT]), np.array([self.a, SOURCE_HEIGHT]))

    @property
    def detector_line(self):
        return (
            np.array([-self.a, DETECTOR_HEIGHT]),
            np.array([self.a, DETECTOR_HEIGHT]),
        )

    @property
    def center_line_height(self):
        return CENTER_LINE_HEIGHT

    @property
    def tunnel_floor(self):
        """Lowest scannable ordinate, 2 - r_m."""
        return CENTER_LINE_HEIGHT - self.r_m


@dataclass(frozen=True)
class ImageGrid:
    """Uniform pixel grid on [x1_min, x1_max] x [x2_min, x2_max].

    Pixel (i, j) is centered at (x1_min + (i + 1/2) dx1,
    x2_min + (j + 1/2) dx2).  Image arrays are stored with shape
    (n2, n1), row index j along x2.
    """

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.x1_max <= self.x1_min or self.x2_max <= self.x2_min:
            raise ValueError("degenerate grid extents")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("pixel counts must be positive")

    @property
    def dx1(self):
        return (self.x1_max - self.x1_min) / self.n1

    @property
    def dx2(self):
        return (self.x2_max - self.x2_min) / self.n2

    @property
    def pixel_area(self):
        return self.dx1 * self.dx2

    @property
    def pixel_diag(self):
        return math.hypot(self.dx1, self.dx2)

    @property
    def x1_centers(self):
        return self.x1_min + (np.arange(self.n1) + 0.5) * self.dx1

    @property
    def x2_centers(self):
        return self.x2_min + (np.arange(self.n2) + 0.5) * self.dx2

    @property
    def n_pixels(self):
        return self.n1 * self.n2

    @property
    def circumradius(self):
        return 0.5 * math.hypot(self.x1_max - self.x1_min, self.x2_max - self.x2_min)

    @property
    def center(self):
        return (
            0.5 * (self.x1_min + self.x1_max),
            0.5 * (self.x2_min + self.x2_max),
        )

    def pixel_index(self, x1, x2):
        """Flat pixel index of the pixel containing (x1, x2), or -1."""
        i = int(np.floor((x1 - self.x1_min) / self.dx1))
        j = int(np.floor((x2 - self.x2_min) / self.dx2))
        if 0 <= i < self.n1 and 0 <= j < self.n2:
            return j * self.n1 + i
        return -1

    def meshgrid(self):
        """(X1, X2) arrays of pixel-center coordinates, shape (n2, n1)."""
        return np.meshgrid(self.x1_centers, self.x2_centers)


@dataclass(frozen=True)
class ToricSinogramGrid:
    """Sample lattice (r, x0) for the scatter transform."""

    r_samples: np.ndarray
    x0_samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r_samples", np.asarray(self.r_samples, float))
        object.__setattr__(self, "x0_samples", np.asarray(self.x0_samples, float))
        if np.any(self.r_samples <= 1.0):
            raise ValueError("toric radii must exceed 1")
        if np.any(np.diff(self.r_samples) <= 0) or np.any(np.diff(self.x0_samples) <= 0):
            raise ValueError("samples must be strictly increasing")

    @property
    def n_r(self):
        return self.r_samples.size

    @property
    def n_x0(self):
        return self.x0_samples.size

    @property
    def n_samples(self):
        return self.n_r * self.n_x0

    @property
    def dr(self):
        return float(self.r_samples[1] - self.r_samples[0]) if self.n_r > 1 else 1.0

    @property
    def dx0(self):
        return float(self.x0_samples[1] - self.x0_samples[0]) if self.n_x0 > 1 else 1.0


@dataclass(frozen=True)
class LineSinogramGrid:
    """Sample lattice (s, theta) for the line transform, with the mask of
    samples whose line meets both the source and detector segments."""

    s_samples: np.ndarray
    theta_samples: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "s_samples", np.asarray(self.s_samples, float))
        object.__setattr__(self, "theta_samples", np.asarray(self.theta_samples, float))
        if np.any(self.theta_samples < -math.pi / 2) or np.any(
            self.theta_samples >= math.pi / 2
        ):
            raise ValueError("theta must lie in [-pi/2, pi/2)")

    def with_mask(self, cfg: ScannerConfig) -> "LineSinogramGrid":
        mask = np.empty((self.n_s, self.n_theta), dtype=bool)
        for k, th in enumerate(self.theta_samples):
            mask[:, k] = [in_H(s, th, cfg) for s in self.s_samples]
        return LineSinogramGrid(self.s_samples, self.theta_samples, mask)

    @property
    def n_s(self):
        return self.s_samples.size

    @property
    def n_theta(self):
        return self.theta_samples.size

    @property
    def n_samples(self):
        return self.n_s * self.n_theta

    @property
    def ds(self):
        return float(self.s_samples[1] - self.s_samples[0]) if self.n_s > 1 else 1.0


def line_from_params(s, theta):
    """Point and unit direction of the line {x . Theta = s}.

    Theta = (cos theta, sin theta) is the unit normal; the returned
    direction is Theta rotated by +90 degrees.
    """
    if not (-math.pi / 2 <= theta < math.pi / 2):
        raise ValueError("theta must lie in [-pi/2, pi/2)")
    ct, st = math.cos(theta), math.sin(theta)
    return np.array([s * ct, s * st]), np.array([-st, ct])


def _hits_horizontal_segment(s, theta, y_seg, a):
    # Intersection of {x . Theta = s} with {x2 = y_seg, |x1| <= a},
    # endpoints inclusive.
    ct, st = math.cos(theta), math.sin(theta)
    if abs(ct) < 1e-300:
        # horizontal line x2 = s/st; hits iff it coincides with the segment
        return abs(s / st - y_seg) == 0.0
    x1 = (s - y_seg * st) / ct
    return -a <= x1 <= a


def in_H(s, theta, cfg: ScannerConfig) -> bool:
    """True iff the line (s, theta) meets both the source and the
    transmission-detector segments."""
    if not (-math.pi / 2 <= theta < math.pi / 2):
        raise ValueError("theta must lie in [-pi/2, pi/2)")
    return _hits_horizontal_segment(s, theta, SOURCE_HEIGHT, cfg.a) and (
        _hits_horizontal_segment(s, theta, DETECTOR_HEIGHT, cfg.a)
    )


def segment_circle_params(s, x0):
    """Centers and radius of the two circles indexed by (s, x0).

    Returns (c1, c2, r) with r = sqrt(s^2 + 1) and
    c_j = ((-1)^j s + x0, 2).
    """
    if s <= 0:
        raise ValueError("require s > 0")
    r = math.sqrt(s * s + 1.0)
    c1 = np.array([-s + x0, CENTER_LINE_HEIGHT])
    c2 = np.array([s + x0, CENTER_LINE_HEIGHT])
    return c1, c2, r


def default_image_grid(n1=200, n2=200) -> ImageGrid:
    """Reconstruction grid [-2,2] x [-3,1]."""
    return ImageGrid(-2.0, 2.0, -3.0, 1.0, n1, n2)


def extended_image_grid(n1=200, n2=200) -> ImageGrid:
    """Artifact-study grid [-3,3] x [-4,2]."""
    return ImageGrid(-3.0, 3.0, -4.0, 2.0, n1, n2)


def default_toric_grid(n_r=400, n_x0=200) -> ToricSinogramGrid:
    """r in {1 + 0.02 j}, x0 in {-4 + 0.04 j} at the default counts;
    other counts keep the same end points."""
    r = 1.0 + (8.0 / n_r) * np.arange(1, n_r + 1)
    x0 = -4.0 + (8.0 / n_x0) * np.arange(1, n_x0 + 1)
    return ToricSinogramGrid(r, x0)


def default_line_grid(img: ImageGrid, cfg: ScannerConfig, n_theta=180) -> LineSinogramGrid:
    """Uniform angles on [-pi/2, pi/2); s spans the circumradius of the
    grid around its center at pixel-diagonal spacing."""
    theta = -math.pi / 2 + math.pi * np.arange(n_theta) / n_theta
    ds = img.pixel_diag
    cx, cy = img.center
    s_max = img.circumradius + math.hypot(cx, cy) + ds
    n_half = int(math.ceil(s_max / ds))
    s = ds * np.arange(-n_half, n_half + 1)
    return LineSinogramGrid(s, theta).with_mask(cfg)


_CONFIG_KEYS = {
    "a",
    "r_m",
    "r_M",
    "x1_min",
    "x1_max",
    "x2_min",
    "x2_max",
    "n1",
    "n2",
    "n_r",
    "n_x0",
    "n_theta",
}


def load_config(path):
    """Read a flat ``key = value`` text file.

    Returns (ScannerConfig, ImageGrid, ToricSinogramGrid, n_theta).
    Unknown keys are returned unparsed in the extras dict so callers
    (solvers, CLI) can pick up their own settings.
    """
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val

    def pop_float(key, default):
        return float(values.pop(key, default))

    def pop_int(key, default):
        return int(values.pop(key, default))

    cfg = ScannerConfig(pop_float("a", 4.0), pop_float("r_m", 7.0), pop_float("r_M", 9.0))
    img = ImageGrid(
        pop_float("x1_min", -2.0),
        pop_float("x1_max", 2.0),
        pop_float("x2_min", -3.0),
        pop_float("x2_max", 1.0),
        pop_int("n1", 200),
        pop_int("n2", 200),
    )
    toric = default_toric_grid(pop_int("n_r", 400), pop_int("n_x0", 200))
    n_theta = pop_int("n_theta", 180)
    return cfg, img, toric, n_theta, values

"""Discretized transforms as explicit sparse matrices with exact adjoints.

Assembled operators: the limited / full line transform (chord-length
weights per pixel), the toric-section transform and its two circle
branches (arc-length weights), and banded derivative filters acting in
the radial sinogram variable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .geometry import (
    CENTER_LINE_HEIGHT,
    ImageGrid,
    LineSinogramGrid,
    ScannerConfig,
    ToricSinogramGrid,
)

_trapz = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "SparseLinearOperator",
    "Sinogram",
    "Image",
    "assemble_toric",
    "assemble_radon",
    "derivative_filter",
    "spectral_norm",
    "backproject_toric_continuous",
    "beta_max_scalar",
    "save_triplets",
    "load_triplets",
]


@dataclass
class Image:
    grid: ImageGrid
    values: np.ndarray  # shape (n2, n1)

    def flat(self):
        return self.values.ravel()

    @classmethod
    def from_flat(cls, grid, v):
        return cls(grid, np.asarray(v, float).reshape(grid.n2, grid.n1))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n2, grid.n1)))


@dataclass
class Sinogram:
    """Transform-domain data.  For toric grids ``values`` has shape
    (n_r, n_x0); for masked line grids it is the 1-D vector of active
    samples in (s, theta) C-order."""

    grid: object
    values: np.ndarray

    def flat(self):
        return self.values.ravel()


class SparseLinearOperator:
    """Row-compressed sparse matrix with bit-exact adjoint pairing."""

    def __init__(self, matrix: sp.csr_matrix, row_labels=None):
        self.matrix = matrix.tocsr()
        self.row_labels = row_labels

    @property
    def n_rows(self):
        return self.matrix.shape[0]

    @property
    def n_cols(self):
        return self.matrix.shape[1]

    @property
    def nnz(self):
        return self.matrix.nnz

    def apply(self, x):
        x = x.flat() if hasattr(x, "flat") and not isinstance(x, np.ndarray) else np.asarray(x)
        x = np.ravel(x)
        if x.size != self.n_cols:
            raise ValueError(f"operand length {x.size} != n_cols {self.n_cols}")
        return self.matrix @ x

    def apply_adjoint(self, y):
        y = y.flat() if hasattr(y, "flat") and not isinstance(y, np.ndarray) else np.asarray(y)
        y = np.ravel(y)
        if y.size != self.n_rows:
            raise ValueError(f"operand length {y.size} != n_rows {self.n_rows}")
        return self.matrix.T @ y


def _assemble_from_rows(row_entries, n_rows, n_cols):
    rows = []
    cols = []
    vals = []
    for ridx, (cidx, w) in enumerate(row_entries):
        if cidx.size:
            rows.append(np.full(cidx.size, ridx, np.int64))
            cols.append(cidx)
            vals.append(w)
    if rows:
        coo = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_rows, n_cols),
        )
    else:
        coo = sp.coo_matrix((n_rows, n_cols))
    coo.sum_duplicates()
    return coo.tocsr()


def _toric_row(img, r, x0, branch_sign, max_step):
    """Arc-length weights of one circle branch restricted to {x2 < 1}."""
    s = math.sqrt(r * r - 1.0)
    cx = branch_sign * s + x0
    cy = CENTER_LINE_HEIGHT
    # lower arc below x2 = 1: sin(phi) < -1/r for phi measured at (cx, cy)
    alpha = math.asin(1.0 / r)
    phi0, phi1 = -math.pi + alpha, -alpha
    # quick reject when the arc cannot meet the grid
    if cx + r < img.x1_min or cx - r > img.x1_max or cy - r > img.x2_max:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    return kernels.trace_arc(
        cx, cy, r, phi0, phi1, max_step,
        img.x1_min, img.x2_min, img.dx1, img.dx2, img.n1, img.n2,
    )


def assemble_toric(img: ImageGrid, sino: ToricSinogramGrid, cfg: ScannerConfig,
                   branch="both") -> SparseLinearOperator:
    """Discrete toric-section transform (or a single circle branch).

    Row (r, x0) holds arc-length weights of the circle branch(es)
    through each pixel inside the image rectangle intersected with
    {x2 < 1}.  ``branch`` is 1, 2 or "both"; "both" is the row-wise sum
    of the two branch matrices.
    """
    if branch not in (1, 2, "both"):
        raise ValueError("branch must be 1, 2 or 'both'")
    if np.any(sino.r_samples <= 0):
        raise ValueError("negative or zero radius")
    if np.any(sino.r_samples > cfg.r_M + 1e-12):
        raise ValueError("radii exceed r_M")
    max_step = 0.25 * min(img.dx1, img.dx2)
    signs = {1: (-1.0,), 2: (1.0,), "both": (-1.0, 1.0)}[branch]
    labels = []
    entries = []
    for r in sino.r_samples:
        for x0 in sino.x0_samples:
            idx_parts = []
            w_parts = []
            for sign in signs:
                ci, cw = _toric_row(img, r, x0, sign, max_step)
                idx_parts.append(ci)
                w_parts.append(cw)
            entries.append((np.concatenate(idx_parts), np.concatenate(w_parts)))
            labels.append((r, x0))
    A = _assemble_from_rows(entries, sino.n_samples, img.n_pixels)
    return SparseLinearOperator(A, row_labels=labels)


def assemble_radon(img: ImageGrid, sino: LineSinogramGrid, limited: bool,
                   cfg: ScannerConfig) -> SparseLinearOperator:
    """Discrete line transform with exact chord-length weights.

    ``limited`` keeps only rows whose line meets both scanner segments
    (the mask on the sinogram grid).
    """
    if limited and sino.mask is None:
        raise ValueError("limited assembly needs a masked sinogram grid")
    entries = []
    labels = []
    for si, s in enumerate(sino.s_samples):
        for ti, th in enumerate(sino.theta_samples):
            if limited and not sino.mask[si, ti]:
                continue
            ct, st = math.cos(th), math.sin(th)
            ci, cw = kernels.line_chords(
                s * ct, s * st, -st, ct,
                img.x1_min, img.x2_min, img.dx1, img.dx2, img.n1, img.n2,
            )
            entries.append((ci, cw))
            labels.append((s, th))
    A = _assemble_from_rows(entries, len(entries), img.n_pixels)
    return SparseLinearOperator(A, row_labels=labels)


def _banded_derivative(n, m, delta):
    eye_like = sp.identity(n, format="csr")
    # zero extension: samples outside the grid are treated as zero
    d1 = sp.diags([-0.5 / delta, 0.5 / delta], [-1, 1], shape=(n, n), format="csr")
    d2 = sp.diags(
        [1.0 / delta**2, -2.0 / delta**2, 1.0 / delta**2],
        [-1, 0, 1],
        shape=(n, n),
        format="csr",
    )
    out = eye_like
    for _ in range(m // 2):
        out = d2 @ out
    if m % 2:
        out = d1 @ out
    return out


def derivative_filter(sino_grid, m: int) -> SparseLinearOperator:
    """Central finite-difference filter of order m in the radial
    sinogram variable (s for line grids, r for toric grids)."""
    if m < 1:
        raise ValueError("require m >= 1")
    if isinstance(sino_grid, ToricSinogramGrid):
        D = _banded_derivative(sino_grid.n_r, m, sino_grid.dr)
        full = sp.kron(D, sp.identity(sino_grid.n_x0), format="csr")
    elif isinstance(sino_grid, LineSinogramGrid):
        D = _banded_derivative(sino_grid.n_s, m, sino_grid.ds)
        full = sp.kron(D, sp.identity(sino_grid.n_theta), format="csr")
    else:
        raise TypeError("unsupported sinogram grid")
    return SparseLinearOperator(full)


def spectral_norm(op, max_iters=200, tol=1e-4, seed=0):
    """Largest singular value by power iteration on A^T A.

    Warns and returns the last iterate if the relative change has not
    dropped below tol within max_iters.
    """
    A = op.matrix if isinstance(op, SparseLinearOperator) else op
    is_zero = A.nnz == 0 if sp.issparse(A) else not np.any(A)
    if is_zero:
        raise ValueError("operator is zero")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iters):
        y = A.T @ (A @ x)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        new_est = math.sqrt(ny)
        x = y / ny
        if est > 0 and abs(new_est - est) <= tol * est:
            return new_est
        est = new_est
    warnings.warn(f"power iteration did not converge; last estimate {est:.6g}")
    return est


def beta_max_scalar(x2, r_M):
    h = CENTER_LINE_HEIGHT - x2
    if not (0 < h < r_M):
        raise ValueError("point outside the reachable band")
    return math.atan(math.sqrt(r_M * r_M / (h * h) - 1.0))


def backproject_toric_continuous(g: Sinogram, branch: int, img: ImageGrid,
                                 cfg: ScannerConfig, n_beta=400) -> Image:
    """Quadrature backprojection of one circle branch.

    Per pixel x, trapezoid integration over the angle beta between the
    vertical at x and the circle center, with bilinear interpolation of
    the sinogram in (r, x0).  Independent of the sparse adjoint; used as
    its oracle.
    """
    if branch not in (1, 2):
        raise ValueError("branch must be 1 or 2")
    grid = g.grid
    if not isinstance(grid, ToricSinogramGrid):
        raise TypeError("toric sinogram required")
    if img.x2_max > 1.0 + 1e-12:
        raise ValueError("pixels with x2 >= 1 rejected")
    sign = 1.0 if branch == 1 else -1.0  # (-1)^(j-1)
    vals = np.asarray(g.values, float)
    r_s, x0_s = grid.r_samples, grid.x0_samples
    out = np.zeros((img.n2, img.n1))
    x1c = img.x1_centers
    for j, x2 in enumerate(img.x2_centers):
        h = CENTER_LINE_HEIGHT - x2
        if h >= cfg.r_M:
            continue
        bm = beta_max_scalar(x2, cfg.r_M)
        beta = np.linspace(-bm, bm, n_beta)
        r = h / np.cos(beta)
        s = np.sqrt(r * r - 1.0)
        # x0(beta) for each pixel in the row, shape (n1, n_beta)
        x0 = x1c[:, None] + sign * s[None, :] + (r * np.sin(beta))[None, :]
        rr = np.broadcast_to(r[None, :], x0.shape)
        vals_interp = _bilinear(vals, r_s, x0_s, rr, x0)
        out[j, :] = _trapz(vals_interp, beta, axis=1)
    return Image(img, out)


def _bilinear(vals, r_s, x0_s, r_q, x0_q):
    """Bilinear interpolation on the (r, x0) lattice; zero outside."""
    dr = r_s[1] - r_s[0]
    dx0 = x0_s[1] - x0_s[0]
    fr = (r_q - r_s[0]) / dr
    fx = (x0_q - x0_s[0]) / dx0
    i0 = np.floor(fr).astype(int)
    j0 = np.floor(fx).astype(int)
    tr = fr - i0
    tx = fx - j0
    out = np.zeros_like(r_q, dtype=float)
    for di, wi in ((0, 1 - tr), (1, tr)):
        for dj, wj in ((0, 1 - tx), (1, tx)):
            ii = i0 + di
            jj = j0 + dj
            ok = (ii >= 0) & (ii < r_s.size) & (jj >= 0) & (jj < x0_s.size)
            out[ok] += (wi * wj)[ok] * vals[ii[ok], jj[ok]]
    return out


def save_triplets(op: SparseLinearOperator, path):
    """Text triplet export: header 'n_rows n_cols nnz', then one
    'row col weight' line per entry."""
    coo = op.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{op.n_rows} {op.n_cols} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")


def load_triplets(path) -> SparseLinearOperator:
    with open(path) as fh:
        n_rows, n_cols, nnz = (int(tok) for tok in fh.readline().split())
        rows = np.empty(nnz, np.int64)
        cols = np.empty(nnz, np.int64)
        vals = np.empty(nnz, np.float64)
        for k in range(nnz):
            r, c, v = fh.readline().split()
            rows[k], cols[k], vals[k] = int(r), int(c), float(v)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    return SparseLinearOperator(mat)

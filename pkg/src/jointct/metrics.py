"""Reconstruction quality metrics: relative error and DICE-style
F-scores on image support and image gradient."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy import ndimage

__all__ = [
    "MetricReport",
    "rel_error",
    "f_score_support",
    "f_score_gradient",
    "report",
    "batch_stats",
]

SUPPORT_TAU = 0.1
GRADIENT_TAU = 0.2


@dataclass
class MetricReport:
    eps_ne: float
    eps_mu: float
    f_supp_ne: float
    f_supp_mu: float
    f_grad_ne: float
    f_grad_mu: float


def _values(x):
    return np.asarray(x.values if hasattr(x, "values") else x, float)


def rel_error(x_true, y):
    """||x - y||_2 / ||x||_2."""
    xt, yv = _values(x_true), _values(y)
    norm = np.linalg.norm(xt)
    if norm == 0:
        raise ValueError("zero ground truth")
    return float(np.linalg.norm(xt - yv) / norm)


def _dice(a, b):
    denom = a.sum() + b.sum()
    if denom == 0:
        return 1.0
    return float(2.0 * np.logical_and(a, b).sum() / denom)


def f_score_support(x_true, y, tau=SUPPORT_TAU):
    """DICE overlap of the supports, binarized at tau times each
    image's maximum."""
    if not (0 < tau < 1):
        raise ValueError("tau must be in (0,1)")
    xt, yv = _values(x_true), _values(y)
    if xt.max() <= 0:
        raise ValueError("empty true support")
    a = xt > tau * xt.max()
    b = yv > tau * yv.max() if yv.max() > 0 else np.zeros_like(a)
    return _dice(a, b)


def _grad_mag(v):
    gx = np.diff(v, axis=1, append=v[:, -1:])
    gy = np.diff(v, axis=0, append=v[-1:, :])
    return np.hypot(gx, gy)


def f_score_gradient(x_true, y, tau_g=GRADIENT_TAU):
    """DICE overlap of edge maps (forward-difference gradient magnitude
    binarized at tau_g of its maximum), with a one-pixel dilation
    tolerance on the true edges."""
    if not (0 < tau_g < 1):
        raise ValueError("tau_g must be in (0,1)")
    gt = _grad_mag(_values(x_true))
    gy = _grad_mag(_values(y))
    if gt.max() == 0:
        raise ValueError("flat ground truth")
    a = gt > tau_g * gt.max()
    b = gy > tau_g * gy.max() if gy.max() > 0 else np.zeros_like(a)
    a_tol = ndimage.binary_dilation(a, np.ones((3, 3), bool))
    # precision against the dilated true edges, recall against the exact ones
    tp_pred = np.logical_and(b, a_tol).sum()
    tp_true = np.logical_and(a, ndimage.binary_dilation(b, np.ones((3, 3), bool))).sum()
    if b.sum() == 0 or a.sum() == 0:
        return 0.0
    precision = tp_pred / b.sum()
    recall = tp_true / a.sum()
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


def report(truth, recon) -> MetricReport:
    """Full metric report for a reconstructed phantom pair."""
    return MetricReport(
        eps_ne=rel_error(truth.n_e, recon.n_e),
        eps_mu=rel_error(truth.mu_E, recon.mu_E),
        f_supp_ne=f_score_support(truth.n_e, recon.n_e),
        f_supp_mu=f_score_support(truth.mu_E, recon.mu_E),
        f_grad_ne=f_score_gradient(truth.n_e, recon.n_e),
        f_grad_mu=f_score_gradient(truth.mu_E, recon.mu_E),
    )


def batch_stats(reports):
    """Sample mean and standard deviation per metric field."""
    if len(reports) < 2:
        raise ValueError("need at least 2 reports")
    names = [f.name for f in fields(MetricReport)]
    data = {n: np.array([getattr(r, n) for r in reports]) for n in names}
    mean = MetricReport(**{n: float(v.mean()) for n, v in data.items()})
    std = MetricReport(**{n: float(v.std(ddof=1)) for n, v in data.items()})
    return mean, std

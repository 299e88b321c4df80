import math

import numpy as np
import pytest

from jointct.kernels import _pure

try:
    from jointct.kernels import _core
except ImportError:
    _core = None

GRID = dict(x1_min=-2.0, x2_min=-3.0, dx1=0.25, dx2=0.25, n1=16, n2=16)


def _dense(idx, w, n):
    out = np.zeros(n)
    np.add.at(out, idx, w)
    return out


def _chords(mod, px, py, dx, dy):
    g = GRID
    return mod.line_chords(px, py, dx, dy, g["x1_min"], g["x2_min"],
                           g["dx1"], g["dx2"], g["n1"], g["n2"])


def _arc(mod, cx, cy, r, phi0, phi1, max_step=0.01):
    g = GRID
    return mod.trace_arc(cx, cy, r, phi0, phi1, max_step, g["x1_min"],
                         g["x2_min"], g["dx1"], g["dx2"], g["n1"], g["n2"])


def test_horizontal_chords_exact():
    idx, w = _chords(_pure, 0.0, -1.875, 1.0, 0.0)
    total = _dense(idx, w, 256)
    row = total.reshape(16, 16)[4]
    assert np.allclose(row, 0.25)
    assert total.sum() == pytest.approx(4.0)


def test_oblique_chords_total_length():
    # diagonal of the square grid; weights are Euclidean for unit directions
    d = 1.0 / math.sqrt(2.0)
    idx, w = _chords(_pure, -2.0, -3.0, d, d)
    assert w.sum() == pytest.approx(4.0 * math.sqrt(2.0), rel=1e-12)


def test_missing_line_empty():
    idx, w = _chords(_pure, 0.0, 10.0, 1.0, 0.0)
    assert idx.size == 0 and w.size == 0


def test_arc_weight_totals_arc_length():
    # arc fully inside the grid
    idx, w = _arc(_pure, 0.0, -1.0, 1.0, -math.pi, 0.0)
    assert w.sum() == pytest.approx(math.pi, rel=1e-6)


def test_arc_respects_grid_bounds():
    idx, w = _arc(_pure, 0.0, 5.0, 1.0, -math.pi, 0.0)
    assert idx.size == 0


@pytest.mark.skipif(_core is None, reason="compiled backend not built")
def test_backends_agree_on_chords():
    rng = np.random.default_rng(3)
    for _ in range(50):
        px, py = rng.uniform(-3, 3), rng.uniform(-4, 2)
        ang = rng.uniform(0, 2 * math.pi)
        args = (px, py, math.cos(ang), math.sin(ang))
        a = _dense(*_chords(_pure, *args), n=256)
        b = _dense(*_chords(_core, *args), n=256)
        assert np.allclose(a, b, atol=1e-9)


@pytest.mark.skipif(_core is None, reason="compiled backend not built")
def test_backends_agree_on_arcs():
    rng = np.random.default_rng(4)
    for _ in range(30):
        cx, cy = rng.uniform(-3, 3), rng.uniform(-1, 4)
        r = rng.uniform(0.5, 6.0)
        phi0 = rng.uniform(-math.pi, 0)
        phi1 = phi0 + rng.uniform(0.1, math.pi)
        a = _dense(*_arc(_pure, cx, cy, r, phi0, phi1), n=256)
        b = _dense(*_arc(_core, cx, cy, r, phi0, phi1), n=256)
        assert np.allclose(a, b, atol=1e-9)

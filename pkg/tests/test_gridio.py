import numpy as np
import pytest

from jointct.geometry import ImageGrid
from jointct.gridio import (
    load_grid,
    load_points,
    render_overlay_ppm,
    render_pgm,
    save_grid,
    save_points,
)
from jointct.operators import Image

GRID = ImageGrid(-2, 2, -3, 1, 7, 5)


def _image(seed=0):
    rng = np.random.default_rng(seed)
    return Image(GRID, rng.standard_normal((GRID.n2, GRID.n1)))


def test_grid_roundtrip_bit_exact(tmp_path):
    img = _image()
    path = tmp_path / "a.grid"
    save_grid(img, path)
    back = load_grid(path)
    assert back.grid == img.grid
    assert np.array_equal(back.values, img.values)


def test_grid_save_is_deterministic(tmp_path):
    img = _image()
    p1, p2 = tmp_path / "a.grid", tmp_path / "b.grid"
    save_grid(img, p1)
    save_grid(img, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_grid_rejects_shape_mismatch(tmp_path):
    bad = Image.__new__(Image)
    bad.grid = GRID
    bad.values = np.zeros((GRID.n1, GRID.n2))  # transposed
    with pytest.raises(ValueError):
        save_grid(bad, tmp_path / "bad.grid")


def test_grid_truncated_payload_rejected(tmp_path):
    path = tmp_path / "a.grid"
    save_grid(_image(), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        load_grid(path)


def test_points_roundtrip(tmp_path):
    pts = np.array([[0.1, -2.5], [1.0 / 3.0, 0.7]])
    path = tmp_path / "pts.txt"
    save_points(pts, path)
    back = load_points(path)
    assert np.array_equal(back, pts)  # repr round-trips float64 exactly


def test_empty_points(tmp_path):
    path = tmp_path / "pts.txt"
    save_points(np.empty((0, 2)), path)
    assert load_points(path).shape == (0, 2)


def test_render_pgm_header_and_size(tmp_path):
    path = tmp_path / "img.pgm"
    render_pgm(_image(), path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n7 5\n255\n")
    assert len(raw) == len(b"P5\n7 5\n255\n") + GRID.n_pixels


def test_render_pgm_orientation(tmp_path):
    # bright pixel at the grid top-left corner must land in the first
    # output row (x2 increases upward in world space)
    vals = np.zeros((GRID.n2, GRID.n1))
    vals[-1, 0] = 1.0
    path = tmp_path / "img.pgm"
    render_pgm(Image(GRID, vals), path)
    raw = path.read_bytes()
    body = raw[len(b"P5\n7 5\n255\n"):]
    assert body[0] == 255


def test_render_overlay_marks_point_red(tmp_path):
    path = tmp_path / "img.ppm"
    img = Image(GRID, np.zeros((GRID.n2, GRID.n1)))
    render_overlay_ppm(img, [(0.0, -1.0)], path)
    raw = path.read_bytes()
    header = b"P6\n7 5\n255\n"
    body = np.frombuffer(raw[len(header):], np.uint8).reshape(GRID.n2, GRID.n1, 3)
    flat = GRID.pixel_index(0.0, -1.0)
    j, i = divmod(flat, GRID.n1)
    assert tuple(body[GRID.n2 - 1 - j, i]) == (255, 0, 0)

import numpy as np
import pytest

from jointct.metrics import (
    batch_stats,
    f_score_gradient,
    f_score_support,
    rel_error,
    report,
)


def test_rel_error_basic():
    x = np.array([3.0, 4.0])
    assert rel_error(x, x) == 0.0
    assert rel_error(x, np.zeros(2)) == pytest.approx(1.0)
    assert rel_error(x, np.array([3.0, 4.0 + 5.0])) == pytest.approx(1.0)


def test_rel_error_zero_truth_rejected():
    with pytest.raises(ValueError):
        rel_error(np.zeros(4), np.ones(4))


def test_support_f_perfect_and_disjoint():
    a = np.zeros((20, 20))
    a[5:10, 5:10] = 1.0
    assert f_score_support(a, a) == 1.0
    b = np.zeros((20, 20))
    b[12:17, 12:17] = 1.0
    assert f_score_support(a, b) == 0.0


def test_support_f_half_overlap():
    a = np.zeros((20, 20))
    a[0:10, 0:10] = 1.0
    b = np.zeros((20, 20))
    b[0:10, 5:15] = 1.0
    # each support has 100 pixels, 50 shared: DICE = 2*50/200
    assert f_score_support(a, b) == pytest.approx(0.5)


def test_support_f_ignores_subthreshold_noise():
    a = np.zeros((20, 20))
    a[5:10, 5:10] = 1.0
    noisy = a + 0.05 * np.ones_like(a)
    assert f_score_support(a, noisy) == 1.0


def test_gradient_f_perfect():
    a = np.zeros((30, 30))
    a[10:20, 10:20] = 1.0
    assert f_score_gradient(a, a) == 1.0


def test_gradient_f_tolerates_one_pixel_shift():
    a = np.zeros((30, 30))
    a[10:20, 10:20] = 1.0
    b = np.zeros((30, 30))
    b[11:21, 10:20] = 1.0
    assert f_score_gradient(a, b) == 1.0


def test_gradient_f_zero_for_flat_recon():
    a = np.zeros((30, 30))
    a[10:20, 10:20] = 1.0
    assert f_score_gradient(a, np.zeros_like(a)) == 0.0


def test_gradient_f_flat_truth_rejected():
    with pytest.raises(ValueError):
        f_score_gradient(np.ones((10, 10)), np.ones((10, 10)))


def test_metrics_accept_image_objects():
    from jointct.geometry import ImageGrid
    from jointct.operators import Image

    g = ImageGrid(-1, 1, -1, 1, 16, 16)
    v = np.zeros((16, 16))
    v[4:10, 4:10] = 2.0
    img = Image(g, v)
    assert rel_error(img, img) == 0.0
    assert f_score_support(img, v) == 1.0


def test_report_and_batch_stats():
    from jointct.geometry import ImageGrid
    from jointct.operators import Image
    from jointct.phantoms import simple_phantom

    g = ImageGrid(-2, 2, -3, 1, 40, 40)
    truth = simple_phantom(g)

    class Rec:
        def __init__(self, scale):
            self.n_e = Image(g, scale * truth.n_e.values)
            self.mu_E = Image(g, scale * truth.mu_E.values)

    reports = [report(truth, Rec(s)) for s in (0.9, 1.0, 1.1)]
    mean, std = batch_stats(reports)
    assert mean.eps_ne == pytest.approx(np.mean([0.1, 0.0, 0.1]), rel=1e-9)
    assert std.eps_mu == pytest.approx(np.std([0.1, 0.0, 0.1], ddof=1), rel=1e-9)
    assert mean.f_supp_ne == 1.0

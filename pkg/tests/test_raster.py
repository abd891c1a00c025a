from fractions import Fraction

import numpy as np
import pytest

from artsim.raster import RasterImage, box_blur, coverage_score, crop_border, line_pixels


def random_image(seed: int, w: int = 24, h: int = 18) -> RasterImage:
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


# ----------------------------------------------------------------------
# box blur
# ----------------------------------------------------------------------

def test_blur_radius_zero_is_identity():
    img = random_image(0)
    assert box_blur(img, 0) == img


def test_blur_uniform_image_unchanged():
    img = RasterImage.filled(10, 7, (13, 200, 77))
    for radius in (1, 2, 5):
        assert box_blur(img, radius) == img


def test_blur_hand_example_3x1():
    img = RasterImage(np.array([[[0] * 3, [255] * 3, [0] * 3]], dtype=np.uint8))
    out = box_blur(img, 1)
    # edge clamp: (0+0+255)/3 = 85 for every position
    assert out.array[0, :, 0].tolist() == [85, 85, 85]


def test_blur_matches_scipy_oracle():
    from scipy.ndimage import uniform_filter

    img = random_image(3, 17, 13)
    for radius in (1, 2):
        ours = box_blur(img, radius).array.astype(np.float64)
        ref = uniform_filter(img.array.astype(np.float64), size=(2 * radius + 1,) * 2 + (1,),
                             mode="nearest")
        assert np.abs(ours - ref).max() <= 0.5 + 1e-9


def test_blur_preserves_interior_sums():
    rng = np.random.default_rng(7)
    h, w, radius = 30, 40, 2
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    arr[radius * 2:-radius * 2, radius * 2:-radius * 2] = rng.integers(
        0, 256, size=(h - 4 * radius, w - 4 * radius, 3), dtype=np.uint8)
    out = box_blur(RasterImage(arr), radius)
    for ch in range(3):
        delta = abs(int(out.array[:, :, ch].sum()) - int(arr[:, :, ch].sum()))
        assert delta <= w * h


# ----------------------------------------------------------------------
# crop
# ----------------------------------------------------------------------

def test_crop_zero_identity():
    img = random_image(1)
    assert crop_border(img, 0.0) == img


def test_crop_examples():
    assert crop_border(RasterImage.filled(100, 100), 0.1).width == 80
    assert crop_border(RasterImage.filled(100, 100), 0.1).height == 80
    out = crop_border(RasterImage.filled(17, 17), 0.1)
    assert (out.width, out.height) == (15, 15)


def test_crop_rejects_bad_fraction():
    with pytest.raises(ValueError):
        crop_border(random_image(2), 0.3)


# ----------------------------------------------------------------------
# coverage
# ----------------------------------------------------------------------

def test_coverage_empty_canvas():
    img = RasterImage.filled(10, 10, (50, 60, 70))
    assert coverage_score(img, (50, 60, 70)) == 0.0


def test_coverage_full_canvas():
    img = RasterImage.filled(10, 10, (255, 255, 255))
    assert coverage_score(img, (0, 0, 0)) == 1.0


def test_coverage_quarter():
    arr = np.zeros((10, 10, 3), dtype=np.uint8)
    arr[:5, :5] = 255  # 25 white pixels on black
    assert coverage_score(RasterImage(arr), (0, 0, 0)) == 0.25


def test_coverage_threshold_is_8():
    base = RasterImage.filled(4, 4, (100, 100, 100))
    within = RasterImage.filled(4, 4, (108, 100, 100))
    beyond = RasterImage.filled(4, 4, (109, 100, 100))
    assert coverage_score(within, (100, 100, 100)) == 0.0
    assert coverage_score(beyond, (100, 100, 100)) == 1.0


def test_coverage_monotone_under_painting():
    rng = np.random.default_rng(11)
    bg = (20, 30, 40)
    arr = np.empty((12, 12, 3), dtype=np.uint8)
    arr[:, :] = bg
    prev = coverage_score(RasterImage(arr.copy()), bg)
    for _ in range(30):
        y, x = rng.integers(0, 12, size=2)
        arr[y, x] = (250, 10, 10)
        score = coverage_score(RasterImage(arr.copy()), bg)
        assert score >= prev
        prev = score


# ----------------------------------------------------------------------
# line rasterization
# ----------------------------------------------------------------------

def oracle_line(x0, y0, x1, y1):
    """Exact-rational midpoint line: step the major axis, minor coordinate
    is floor(i*minor/major + 1/2)."""
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x1 >= x0 else -1
    sy = 1 if y1 >= y0 else -1
    pts = []
    if dx == 0 and dy == 0:
        return [(x0, y0)]
    if dx >= dy:
        for i in range(dx + 1):
            frac = Fraction(i * dy, dx) + Fraction(1, 2)
            pts.append((x0 + sx * i, y0 + sy * int(frac.__floor__())))
    else:
        for i in range(dy + 1):
            frac = Fraction(i * dx, dy) + Fraction(1, 2)
            pts.append((x0 + sx * int(frac.__floor__()), y0 + sy * i))
    return pts


@pytest.mark.parametrize("seg", [
    (0, 0, 10, 0), (0, 0, 0, 10), (0, 0, 7, 7), (5, 22, 3, 9),
    (10, 10, -5, 3), (0, 0, 13, 4), (0, 0, 4, 13), (2, 2, 2, 2),
])
def test_line_pixels_match_rational_oracle(seg):
    xs, ys = line_pixels(*seg)
    assert list(zip(xs.tolist(), ys.tolist())) == oracle_line(*seg)


def test_line_pixels_random_against_oracle():
    rng = np.random.default_rng(5)
    for _ in range(200):
        x0, y0, x1, y1 = rng.integers(-30, 31, size=4).tolist()
        xs, ys = line_pixels(x0, y0, x1, y1)
        pts = list(zip(xs.tolist(), ys.tolist()))
        assert pts == oracle_line(x0, y0, x1, y1)
        assert pts[0] == (x0, y0) and pts[-1] == (x1, y1)
        for (ax, ay), (bx, by) in zip(pts, pts[1:]):
            assert max(abs(ax - bx), abs(ay - by)) == 1  # 8-connected steps


# ----------------------------------------------------------------------
# RasterImage plumbing
# ----------------------------------------------------------------------

def test_png_round_trip():
    img = random_image(9)
    assert RasterImage.from_png(img.to_png()) == img


def test_shape_validation():
    with pytest.raises(ValueError):
        RasterImage(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        RasterImage(np.zeros((4, 4, 3), dtype=np.float32))

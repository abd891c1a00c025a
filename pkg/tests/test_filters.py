import random

import numpy as np
import pytest

from artsim.errors import DepthExceeded
from artsim.filtertree import (
    BinaryFilter,
    Source,
    UnaryFilter,
    apply_filter,
    filter_depth,
    filter_from_sexpr,
    filter_to_sexpr,
    random_filter_library,
)
from artsim.raster import RasterImage

COMMUTATIVE = ("xor", "add_sat", "multiply", "min", "max", "and", "or", "screen")


def random_image(seed, w=20, h=16):
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def test_source_is_identity():
    img = random_image(0)
    assert apply_filter(Source(), img) == img


def test_xor_with_self_is_black():
    img = random_image(1)
    out = apply_filter(BinaryFilter("xor", Source(), Source()), img)
    assert (out.array == 0).all()


def test_invert_hand_example():
    img = RasterImage(np.array([[[10, 200, 255]]], dtype=np.uint8))
    out = apply_filter(UnaryFilter("invert", Source()), img)
    assert tuple(out.array[0, 0]) == (245, 55, 0)


def test_threshold_splits_on_luma():
    img = RasterImage(np.array([[[0, 0, 0], [255, 255, 255]]], dtype=np.uint8))
    out = apply_filter(UnaryFilter("threshold", Source(), 128), img)
    assert tuple(out.array[0, 0]) == (0, 0, 0)
    assert tuple(out.array[0, 1]) == (255, 255, 255)


def test_grayscale_is_luma_replicated():
    img = RasterImage(np.array([[[100, 150, 200]]], dtype=np.uint8))
    out = apply_filter(UnaryFilter("grayscale", Source()), img)
    luma = (299 * 100 + 587 * 150 + 114 * 200 + 500) // 1000
    assert tuple(out.array[0, 0]) == (luma,) * 3


def test_channel_swap():
    img = RasterImage(np.array([[[10, 20, 30]]], dtype=np.uint8))
    out = apply_filter(UnaryFilter("channel_swap", Source(), "gbr"), img)
    assert tuple(out.array[0, 0]) == (20, 30, 10)


def test_posterize_two_levels_is_binary_per_channel():
    img = random_image(2)
    out = apply_filter(UnaryFilter("posterize", Source(), 2), img)
    assert set(np.unique(out.array)) <= {0, 255}


def test_hue_rotate_full_turn_is_near_identity():
    img = random_image(3)
    out = apply_filter(UnaryFilter("hue_rotate", Source(), 360.0), img)
    assert np.abs(out.array.astype(int) - img.array.astype(int)).max() <= 1


def test_commutative_binaries():
    left = UnaryFilter("invert", Source())
    right = UnaryFilter("blur", Source(), 1)
    img = random_image(4)
    for kind in COMMUTATIVE:
        a = apply_filter(BinaryFilter(kind, left, right), img)
        b = apply_filter(BinaryFilter(kind, right, left), img)
        assert a == b, kind


def test_subtract_sat_is_not_commutative_but_saturates():
    img = random_image(5)
    dark = UnaryFilter("threshold", Source(), 250)
    out = apply_filter(BinaryFilter("subtract_sat", dark, Source()), img)
    assert out.array.dtype == np.uint8


def test_output_dimensions_match_source():
    img = random_image(6, w=33, h=7)
    lib = random_filter_library(seed=3, count=20, max_depth=4)
    for node in lib.filters:
        out = apply_filter(node, img)
        assert (out.width, out.height) == (img.width, img.height)


def test_saturation_fuzz_over_random_trees():
    rng = random.Random(7)
    lib = random_filter_library(seed=8, count=40, max_depth=5)
    for node in lib.filters:
        img = random_image(rng.randrange(1000), w=12, h=9)
        out = apply_filter(node, img)
        assert out.array.dtype == np.uint8
        assert int(out.array.min()) >= 0 and int(out.array.max()) <= 255


def test_library_deterministic():
    a = random_filter_library(seed=1, count=3)
    b = random_filter_library(seed=1, count=3)
    assert a.filters == b.filters


def test_library_count_1000():
    lib = random_filter_library(seed=2, count=1000)
    assert len(lib.filters) == 1000


def test_library_max_depth_one():
    lib = random_filter_library(seed=3, count=200, max_depth=1)
    for node in lib.filters:
        assert isinstance(node, Source) or (
            isinstance(node, UnaryFilter) and isinstance(node.child, Source))


def test_library_respects_depth_bound():
    for depth in (2, 4, 8):
        lib = random_filter_library(seed=4, count=100, max_depth=depth)
        assert max(filter_depth(node) for node in lib.filters) <= depth


def test_depth_exceeded():
    node = Source()
    for _ in range(9):
        node = UnaryFilter("invert", node)
    with pytest.raises(DepthExceeded):
        apply_filter(node, random_image(8))


def test_sexpr_round_trip():
    lib = random_filter_library(seed=5, count=50, max_depth=6)
    for node in lib.filters:
        assert filter_from_sexpr(filter_to_sexpr(node)) == node


def test_sexpr_example_shape():
    node = BinaryFilter("xor", UnaryFilter("blur", Source(), 2), Source())
    assert filter_to_sexpr(node) == "(xor (blur 2 source) source)"
    assert filter_from_sexpr("(xor (blur 2 source) source)") == node

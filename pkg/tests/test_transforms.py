import math

import numpy as np
import pytest

from artsim.errors import InvalidSegment
from artsim.imagegen import Ellipse, LineTransform, Segment, apply_line_transform


class Canvas:
    def __init__(self, w, h):
        self.width, self.height = w, h


C100 = Canvas(100, 100)


def endpoints(prims):
    (seg,) = prims
    return (seg.x0, seg.y0), (seg.x1, seg.y1)


def random_segments(n, w=100, h=100, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.2 * w, 1.2 * w, size=(n, 4))


def test_identity_returns_segment_unchanged():
    out = apply_line_transform(LineTransform("identity"), (10, 10, 20, 20), C100)
    assert out == [Segment(10, 10, 20, 20)]


def test_polar_hand_example():
    # endpoint (100, 50) about center (50, 50): theta=0, r=50,
    # r_max = sqrt(50^2+50^2); mapped to (W*(0+pi)/2pi, H*r/r_max)
    (p0, _) = endpoints(apply_line_transform(
        LineTransform("polar"), (100.0, 50.0, 100.0, 50.0), C100))
    assert p0[0] == pytest.approx(50.0)
    assert p0[1] == pytest.approx(100.0 * 50.0 / math.hypot(50, 50))
    assert p0[1] == pytest.approx(70.71, abs=0.005)


def test_polar_center_maps_to_y_zero():
    (p0, _) = endpoints(apply_line_transform(
        LineTransform("polar"), (50.0, 50.0, 50.0, 50.0), C100))
    assert p0[1] == 0.0  # r = 0, atan2(0,0) defined as 0 -> x = W/2
    assert p0[0] == pytest.approx(50.0)


def test_polar_stays_on_canvas_for_on_canvas_points():
    # points inside the canvas have r <= r_max, so both outputs stay in range
    rng = np.random.default_rng(0)
    for seg in rng.uniform(0, 100, size=(10_000, 4)):
        for (x, y) in endpoints(apply_line_transform(LineTransform("polar"), seg, C100)):
            assert -1e-9 <= y <= 100 + 1e-9
            assert -1e-9 <= x <= 100 + 1e-9


def test_oval_definition_instantiation():
    (prim,) = apply_line_transform(LineTransform("oval"), (0, 0, 10, 0), C100)
    assert prim == Ellipse(0, 0, 10, 0, 15.0)


def test_kaleidoscope_angles_within_one_wedge():
    t = LineTransform("kaleidoscope", sector_count=5)
    wedge = 2 * math.pi / 5
    cx = cy = 50.0
    for seg in random_segments(10_000, seed=1):
        for (x, y) in endpoints(apply_line_transform(t, seg, C100)):
            if math.hypot(x - cx, y - cy) < 1e-9:
                continue
            theta = math.atan2(y - cy, x - cx) % (2 * math.pi)
            assert theta <= wedge + 1e-9


def test_kaleidoscope_preserves_radius():
    t = LineTransform("kaleidoscope", sector_count=7)
    for seg in random_segments(1000, seed=2):
        (x0, y0), _ = endpoints(apply_line_transform(t, seg, C100))
        assert math.hypot(x0 - 50, y0 - 50) == pytest.approx(
            math.hypot(seg[0] - 50, seg[1] - 50), abs=1e-9)


def test_grid_output_lies_in_anchor_cell():
    t = LineTransform("grid", cell_size=16)
    for seg in random_segments(10_000, seed=3):
        prims = apply_line_transform(t, seg, C100)
        ax = math.floor(seg[0] / 16) * 16
        ay = math.floor(seg[1] / 16) * 16
        for (x, y) in endpoints(prims):
            assert ax - 1e-9 <= x <= ax + 16 + 1e-9
            assert ay - 1e-9 <= y <= ay + 16 + 1e-9


def test_grid_first_endpoint_fixed():
    t = LineTransform("grid", cell_size=20)
    for seg in random_segments(500, seed=4):
        (p0, _) = endpoints(apply_line_transform(t, seg, C100))
        assert p0[0] == pytest.approx(seg[0], abs=1e-9)
        assert p0[1] == pytest.approx(seg[1], abs=1e-9)


def test_diamond_within_l1_wedge():
    t = LineTransform("diamond")
    r_max = math.hypot(50, 50)
    for seg in random_segments(10_000, seed=5):
        for (x, y) in endpoints(apply_line_transform(t, seg, C100)):
            assert abs(x - 50) + abs(y - 50) <= r_max / 2 + 1e-9


def test_diamond_preserves_direction():
    t = LineTransform("diamond")
    (p0, _) = endpoints(apply_line_transform(t, (60.0, 50.0, 60.0, 50.0), C100))
    assert p0[1] == pytest.approx(50.0)
    assert p0[0] > 50.0  # stays on the +x ray


def test_necklace_pulls_toward_nearest_bead():
    t = LineTransform("necklace", bead_count=6, pull_fraction=0.6)
    radius = 100 / 3
    beads = [(50 + radius * math.cos(2 * math.pi * j / 6),
              50 + radius * math.sin(2 * math.pi * j / 6)) for j in range(6)]
    for seg in random_segments(1000, seed=6):
        (x, y) = endpoints(apply_line_transform(t, seg, C100))[0]
        before = min(math.hypot(seg[0] - bx, seg[1] - by) for bx, by in beads)
        after = min(math.hypot(x - bx, y - by) for bx, by in beads)
        assert after == pytest.approx((1 - 0.6) * before, abs=1e-6)


def test_tron_snaps_to_45_degrees_and_preserves_length():
    t = LineTransform("tron")
    for seg in random_segments(1000, seed=7):
        (p0, p1) = endpoints(apply_line_transform(t, seg, C100))
        length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
        assert length == pytest.approx(math.hypot(seg[2] - seg[0], seg[3] - seg[1]), abs=1e-9)
        if length > 1e-9:
            phi = math.atan2(p1[1] - p0[1], p1[0] - p0[0])
            ratio = phi / (math.pi / 4)
            assert ratio == pytest.approx(round(ratio), abs=1e-9)


def test_non_finite_segment_rejected():
    with pytest.raises(InvalidSegment):
        apply_line_transform(LineTransform("identity"), (0, 0, math.nan, 1), C100)
    with pytest.raises(InvalidSegment):
        apply_line_transform(LineTransform("polar"), (math.inf, 0, 1, 1), C100)


@pytest.mark.parametrize("kwargs", [
    {"kind": "nope"},
    {"kind": "necklace", "bead_count": 1},
    {"kind": "grid", "cell_size": 3},
    {"kind": "kaleidoscope", "sector_count": 1},
    {"kind": "necklace", "pull_fraction": 1.5},
    {"kind": "oval", "axis_factor": 0.8},
])
def test_parameter_validation(kwargs):
    with pytest.raises(ValueError):
        LineTransform(**kwargs)

"""Endpoint remappings applied to particle trails before rasterization.

Each transform moves the start and end points of a line segment (or, for
"oval", replaces the segment by an ellipse primitive). Outputs may leave
the canvas; clipping happens at rasterization, not here.

Formulas (c = canvas center, r_max = |c|):

  identity      unchanged.
  polar         (x,y) -> (W*(theta+pi)/2pi, H*r/r_max) with r,theta polar
                about c and atan2(0,0) := 0.
  diamond       L1 radius |u|+|v| about c triangle-folded into
                [0, r_max/2]; direction preserved.
  grid          both endpoints mapped into the cell containing the first
                endpoint: anchor + (coord mod cell_size) per axis.
  kaleidoscope  angle about c triangle-folded into one [0, 2pi/sectors]
                wedge; radius unchanged.
  necklace      each endpoint pulled fraction alpha toward the nearest of
                bead_count bead centers evenly spaced on the circle of
                radius min(W,H)/3 about c.
  oval          ellipse with foci at the endpoints and major axis k*d.
  tron          direction snapped to the nearest multiple of 45 degrees
                about the segment midpoint, length preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import InvalidSegment

__all__ = ["LineTransform", "Segment", "Ellipse", "apply_line_transform", "TRANSFORM_KINDS"]

TRANSFORM_KINDS = (
    "identity", "diamond", "grid", "kaleidoscope",
    "necklace", "oval", "polar", "tron",
)


@dataclass(frozen=True)
class Segment:
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class Ellipse:
    """Outline ellipse given by its two foci and major-axis length."""

    fx0: float
    fy0: float
    fx1: float
    fy1: float
    major_axis: float


@dataclass(frozen=True)
class LineTransform:
    kind: str = "identity"
    bead_count: int = 8            # necklace
    pull_fraction: float = 0.6     # necklace
    cell_size: int = 16            # grid
    sector_count: int = 6          # kaleidoscope
    axis_factor: float = 1.5       # oval

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.bead_count < 2:
            raise ValueError("bead_count must be >= 2")
        if self.cell_size < 4:
            raise ValueError("cell_size must be >= 4")
        if self.sector_count < 2:
            raise ValueError("sector_count must be >= 2")
        if not 0.0 <= self.pull_fraction <= 1.0:
            raise ValueError("pull_fraction must be in [0, 1]")
        if self.axis_factor < 1.0:
            raise ValueError("axis_factor must be >= 1 (ellipse needs a >= c)")


def _fold(value: float, upper: float) -> float:
    """Triangle-fold into [0, upper]."""
    if upper <= 0:
        return 0.0
    w = math.fmod(value, 2.0 * upper)
    if w < 0:
        w += 2.0 * upper
    return w if w <= upper else 2.0 * upper - w


def apply_line_transform(t: LineTransform, segment, canvas) -> list:
    """Map one (x0, y0, x1, y1) segment to a list of drawing primitives.

    canvas only contributes its width/height (any object with .width and
    .height works). Raises InvalidSegment on non-finite coordinates.
    """
    x0, y0, x1, y1 = segment
    if not all(math.isfinite(v) for v in (x0, y0, x1, y1)):
        raise InvalidSegment(f"non-finite segment {segment!r}")
    w, h = canvas.width, canvas.height
    cx, cy = w / 2.0, h / 2.0
    kind = t.kind

    if kind == "identity":
        return [Segment(x0, y0, x1, y1)]

    if kind == "polar":
        return [Segment(*_polar(x0, y0, cx, cy, w, h), *_polar(x1, y1, cx, cy, w, h))]

    if kind == "diamond":
        r_max = math.hypot(cx, cy)
        return [Segment(*_diamond(x0, y0, cx, cy, r_max), *_diamond(x1, y1, cx, cy, r_max))]

    if kind == "grid":
        cell = float(t.cell_size)
        ax = math.floor(x0 / cell) * cell
        ay = math.floor(y0 / cell) * cell
        return [Segment(ax + x0 % cell, ay + y0 % cell, ax + x1 % cell, ay + y1 % cell)]

    if kind == "kaleidoscope":
        wedge = 2.0 * math.pi / t.sector_count
        return [Segment(*_kaleido(x0, y0, cx, cy, wedge), *_kaleido(x1, y1, cx, cy, wedge))]

    if kind == "necklace":
        radius = min(w, h) / 3.0
        beads = [
            (cx + radius * math.cos(2.0 * math.pi * j / t.bead_count),
             cy + radius * math.sin(2.0 * math.pi * j / t.bead_count))
            for j in range(t.bead_count)
        ]
        return [Segment(*_pull(x0, y0, beads, t.pull_fraction),
                        *_pull(x1, y1, beads, t.pull_fraction))]

    if kind == "oval":
        d = math.hypot(x1 - x0, y1 - y0)
        return [Ellipse(x0, y0, x1, y1, t.axis_factor * d)]

    if kind == "tron":
        mx, my = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        half = math.hypot(x1 - x0, y1 - y0) / 2.0
        phi = math.atan2(y1 - y0, x1 - x0) if (x1 != x0 or y1 != y0) else 0.0
        snapped = round(phi / (math.pi / 4.0)) * (math.pi / 4.0)
        dx, dy = half * math.cos(snapped), half * math.sin(snapped)
        return [Segment(mx - dx, my - dy, mx + dx, my + dy)]

    raise AssertionError(f"unhandled kind {kind!r}")


def _polar(x, y, cx, cy, w, h):
    u, v = x - cx, y - cy
    r = math.hypot(u, v)
    theta = math.atan2(v, u) if r > 0 else 0.0
    r_max = math.hypot(cx, cy)
    return w * (theta + math.pi) / (2.0 * math.pi), h * r / r_max


def _diamond(x, y, cx, cy, r_max):
    u, v = x - cx, y - cy
    s = abs(u) + abs(v)
    if s == 0:
        return cx, cy
    scale = _fold(s, r_max / 2.0) / s
    return cx + u * scale, cy + v * scale


def _kaleido(x, y, cx, cy, wedge):
    u, v = x - cx, y - cy
    r = math.hypot(u, v)
    if r == 0:
        return cx, cy
    theta = math.atan2(v, u) % (2.0 * math.pi)
    folded = _fold(theta, wedge)
    return cx + r * math.cos(folded), cy + r * math.sin(folded)


def _pull(x, y, beads, alpha):
    bx, by = min(beads, key=lambda b: (b[0] - x) ** 2 + (b[1] - y) ** 2)
    return x + alpha * (bx - x), y + alpha * (by - y)

"""8-bit RGB raster images plus the pixel-level primitives shared by the
generators and the corpus builder: exact box blur, border crop, coverage
scoring and integer line rasterization.

All operations are pure and deterministic; images are kept as HxWx3 uint8
numpy arrays in row-major order.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "RasterImage",
    "box_blur",
    "crop_border",
    "coverage_score",
    "line_pixels",
    "draw_segment",
]


@dataclass(frozen=True)
class RasterImage:
    """Row-major RGB image, 8 bits per channel."""

    array: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        arr = np.asarray(self.array)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
        object.__setattr__(self, "array", arr)

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, color=(0, 0, 0)) -> "RasterImage":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:, :] = np.asarray(color, dtype=np.uint8)
        return cls(arr)

    @classmethod
    def from_png(cls, data: bytes) -> "RasterImage":
        img = Image.open(io.BytesIO(data))
        return cls(np.asarray(img.convert("RGB"), dtype=np.uint8))

    @classmethod
    def load(cls, path) -> "RasterImage":
        with Image.open(path) as img:
            return cls(np.asarray(img.convert("RGB"), dtype=np.uint8))

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.array, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path) -> None:
        Image.fromarray(self.array, mode="RGB").save(path, format="PNG")

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.array.shape == other.array.shape and bool(
            np.array_equal(self.array, other.array)
        )


def box_blur(img: RasterImage, radius: int) -> RasterImage:
    """Mean over the (2r+1)^2 neighborhood with edge clamping.

    Computed with exact integer sliding-window sums; each channel value is
    the neighborhood mean rounded half-up, so repeated runs are bit-identical.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return img
    arr = img.array.astype(np.int64)
    padded = np.pad(arr, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    n = 2 * radius + 1
    # separable window sums via cumulative sums along each axis
    c = np.cumsum(padded, axis=0)
    c = np.concatenate([np.zeros_like(c[:1]), c], axis=0)
    rows = c[n:] - c[:-n]
    c = np.cumsum(rows, axis=1)
    c = np.concatenate([np.zeros_like(c[:, :1]), c], axis=1)
    sums = c[:, n:] - c[:, :-n]
    count = n * n
    out = (2 * sums + count) // (2 * count)  # round half-up
    return RasterImage(out.astype(np.uint8))


def crop_border(img: RasterImage, fraction: float) -> RasterImage:
    """Remove floor(fraction * dim) pixels from each side."""
    if not 0.0 <= fraction <= 0.25:
        raise ValueError("fraction must be in [0, 0.25]")
    if fraction == 0.0:
        return img
    dx = int(fraction * img.width)
    dy = int(fraction * img.height)
    if dx == 0 and dy == 0:
        return img
    return RasterImage(img.array[dy: img.height - dy, dx: img.width - dx].copy())


def coverage_score(img: RasterImage, background) -> float:
    """Fraction of pixels whose max per-channel deviation from the
    background exceeds 8."""
    bg = np.asarray(background, dtype=np.int16)
    dev = np.abs(img.array.astype(np.int16) - bg).max(axis=2)
    return float((dev > 8).mean())


def line_pixels(x0: int, y0: int, x1: int, y1: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates of the 1-px integer midpoint line from (x0,y0) to (x1,y1).

    Closed form of the Bresenham selection: stepping along the major axis,
    the minor coordinate is floor(i*minor/major + 1/2), evaluated in exact
    integer arithmetic. Returns (xs, ys) including both endpoints.
    """
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    if dx == 0 and dy == 0:
        return np.array([x0]), np.array([y0])
    sx = 1 if x1 >= x0 else -1
    sy = 1 if y1 >= y0 else -1
    if dx >= dy:
        i = np.arange(dx + 1)
        xs = x0 + sx * i
        ys = y0 + sy * ((2 * i * dy + dx) // (2 * dx))
    else:
        i = np.arange(dy + 1)
        ys = y0 + sy * i
        xs = x0 + sx * ((2 * i * dx + dy) // (2 * dy))
    return xs, ys


def draw_segment(canvas: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    """Paint a midpoint line onto an (H, W, 3) uint8 array in place.

    Pixels outside the canvas are dropped (clipping happens here, after any
    geometric transform has moved the endpoints).
    """
    xs, ys = line_pixels(x0, y0, x1, y1)
    h, w = canvas.shape[:2]
    keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    canvas[ys[keep], xs[keep]] = color

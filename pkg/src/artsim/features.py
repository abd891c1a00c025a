"""Image embeddings for similarity retrieval.

The built-in descriptor is a deterministic hand-crafted stand-in for a
convolutional feature extractor: the image is resized so its shorter edge
hits a fixed length, split into a grid of cells, and each cell contributes
per-channel intensity histograms plus a magnitude-weighted gradient
orientation histogram. Histogram blocks are L2-normalized individually
(zero blocks stay zero) and the concatenation is L2-normalized again, so
every descriptor is a unit vector.

Externally computed embeddings (e.g. from a pretrained network) can be
ingested from a simple whitespace-separated text format and are normalized
on load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    AllZeroDescriptor,
    DuplicateId,
    ImageTooSmall,
    InconsistentDimension,
    MalformedRow,
)
from .raster import RasterImage
from .validation import as_vector

__all__ = [
    "DescriptorConfig",
    "DescriptorExtractor",
    "extract_descriptor",
    "cosine_distance",
    "load_external_embeddings",
]

_LUMA = (0.299, 0.587, 0.114)  # ITU-R 601


@dataclass(frozen=True)
class DescriptorConfig:
    grid: int = 4
    color_bins: int = 8
    gradient_bins: int = 8
    resize_edge: int = 128

    def __post_init__(self):
        if min(self.grid, self.color_bins, self.gradient_bins) < 1:
            raise ValueError("grid and bin counts must be >= 1")
        if self.resize_edge < 16:
            raise ValueError("resize_edge must be >= 16")

    @property
    def dimension(self) -> int:
        return self.grid * self.grid * (3 * self.color_bins + self.gradient_bins)


class DescriptorExtractor(TransformerMixin, BaseEstimator):
    """Maps images to unit-norm descriptor vectors.

    Stateless transformer: fit only validates the configuration, transform
    accepts an iterable of RasterImage (or HxWx3 uint8 arrays) and returns
    an (n, dimension) float array.
    """

    def __init__(self, grid: int = 4, color_bins: int = 8,
                 gradient_bins: int = 8, resize_edge: int = 128):
        self.grid = grid
        self.color_bins = color_bins
        self.gradient_bins = gradient_bins
        self.resize_edge = resize_edge

    @classmethod
    def from_config(cls, cfg: DescriptorConfig) -> "DescriptorExtractor":
        return cls(cfg.grid, cfg.color_bins, cfg.gradient_bins, cfg.resize_edge)

    @property
    def config(self) -> DescriptorConfig:
        return DescriptorConfig(self.grid, self.color_bins,
                                self.gradient_bins, self.resize_edge)

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def fit(self, X=None, y=None):
        self.config  # validates parameter ranges
        return self

    def transform(self, X) -> np.ndarray:
        return np.stack([self.extract(img) for img in X])

    def extract(self, img) -> np.ndarray:
        if isinstance(img, RasterImage):
            arr = img.array
        else:
            arr = np.asarray(img, dtype=np.uint8)
        cfg = self.config
        if arr.shape[0] < 16 or arr.shape[1] < 16:
            raise ImageTooSmall(f"{arr.shape[1]}x{arr.shape[0]} below 16x16 minimum")
        arr = _resize_shorter_edge(arr, cfg.resize_edge)
        h, w = arr.shape[:2]

        luma = arr[:, :, 0] * _LUMA[0] + arr[:, :, 1] * _LUMA[1] + arr[:, :, 2] * _LUMA[2]
        gy, gx = np.gradient(luma)
        magnitude = np.hypot(gx, gy)
        theta = np.mod(np.arctan2(gy, gx), np.pi)
        theta_bin = np.minimum(
            (theta / np.pi * cfg.gradient_bins).astype(np.int64), cfg.gradient_bins - 1)

        row_edges = [h * i // cfg.grid for i in range(cfg.grid + 1)]
        col_edges = [w * i // cfg.grid for i in range(cfg.grid + 1)]
        blocks = []
        for r in range(cfg.grid):
            for c in range(cfg.grid):
                rows = slice(row_edges[r], row_edges[r + 1])
                cols = slice(col_edges[c], col_edges[c + 1])
                cell = arr[rows, cols]
                for ch in range(3):
                    hist = np.bincount(
                        cell[:, :, ch].reshape(-1).astype(np.int64) * cfg.color_bins // 256,
                        minlength=cfg.color_bins).astype(np.float64)
                    blocks.append(_unit_or_zero(hist))
                ghist = np.bincount(
                    theta_bin[rows, cols].reshape(-1),
                    weights=magnitude[rows, cols].reshape(-1),
                    minlength=cfg.gradient_bins)
                blocks.append(_unit_or_zero(ghist))
        vec = np.concatenate(blocks)
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            raise AllZeroDescriptor("descriptor is identically zero")
        return vec / norm


def _unit_or_zero(block: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(block)
    return block / norm if norm > 0 else block


def _resize_shorter_edge(arr: np.ndarray, edge: int) -> np.ndarray:
    h, w = arr.shape[:2]
    if min(h, w) == edge:
        return arr
    scale = edge / min(h, w)
    if h <= w:
        new_h, new_w = edge, max(1, round(w * scale))
    else:
        new_h, new_w = max(1, round(h * scale)), edge
    img = Image.fromarray(arr, mode="RGB").resize((new_w, new_h), Image.Resampling.BILINEAR)
    return np.asarray(img, dtype=np.uint8)


def extract_descriptor(img, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    return DescriptorExtractor.from_config(cfg).extract(img)


def cosine_distance(a, b) -> float:
    """1 - a.b for unit vectors; symmetric, in [0, 2]."""
    av = as_vector(a)
    bv = as_vector(b, dim=av.shape[0])
    return float(1.0 - float(av @ bv))


def load_external_embeddings(path) -> dict[str, np.ndarray]:
    """Parse `<image-id> <f1> ... <fD>` lines into unit vectors keyed by id."""
    out: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            image_id, raw = tokens[0], tokens[1:]
            if not raw:
                raise MalformedRow(f"line {lineno}: no vector values")
            try:
                vec = np.array([float(v) for v in raw], dtype=np.float64)
            except ValueError as exc:
                raise MalformedRow(f"line {lineno}: {exc}") from None
            if not np.isfinite(vec).all():
                raise MalformedRow(f"line {lineno}: non-finite value")
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise InconsistentDimension(
                    f"line {lineno}: dimension {vec.shape[0]} != {dim}")
            if image_id in out:
                raise DuplicateId(image_id)
            norm = np.linalg.norm(vec)
            if norm < 1e-12:
                raise MalformedRow(f"line {lineno}: zero vector")
            out[image_id] = vec / norm
    return out

"""Tree-structured image filters.

A filter is a composition tree: Source leaves pass the input photo through,
unary nodes apply a single transformation (blur, emboss, threshold, ...)
and binary nodes composite the two sub-results pixelwise (bitwise ops,
saturating arithmetic, multiply/screen blends). All channel arithmetic
saturates at [0, 255] and is integer-exact, so applications are
deterministic down to the byte.

Depth is counted in operator levels: a bare Source is depth 0, a single
unary over Source is depth 1. Trees deeper than MAX_FILTER_DEPTH are
rejected at application time.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DepthExceeded
from .raster import RasterImage, box_blur

__all__ = [
    "MAX_FILTER_DEPTH",
    "UNARY_KINDS",
    "BINARY_KINDS",
    "Source",
    "UnaryFilter",
    "BinaryFilter",
    "FilterNode",
    "FilterLibrary",
    "filter_depth",
    "apply_filter",
    "random_filter_library",
    "filter_to_sexpr",
    "filter_from_sexpr",
]

MAX_FILTER_DEPTH = 8

UNARY_KINDS = (
    "blur", "sharpen", "emboss", "invert", "grayscale",
    "threshold", "channel_swap", "posterize", "hue_rotate",
)
BINARY_KINDS = (
    "and", "or", "xor", "add_sat", "subtract_sat",
    "multiply", "screen", "min", "max",
)

# 3-letter codes for the non-identity channel permutations; "gbr" reads
# output (R,G,B) = input (G,B,R).
_SWAP_CODES = ("rbg", "grb", "gbr", "brg", "bgr")
_SWAP_PERMS = {code: tuple("rgb".index(ch) for ch in code) for code in _SWAP_CODES}


@dataclass(frozen=True)
class Source:
    pass


@dataclass(frozen=True)
class UnaryFilter:
    kind: str
    child: "FilterNode"
    param: object = None  # blur radius, threshold level, swap code, ...


@dataclass(frozen=True)
class BinaryFilter:
    kind: str
    left: "FilterNode"
    right: "FilterNode"


FilterNode = Union[Source, UnaryFilter, BinaryFilter]


@dataclass
class FilterLibrary:
    filters: list = field(default_factory=list)
    seed: int = 0


def filter_depth(node: FilterNode) -> int:
    if isinstance(node, Source):
        return 0
    if isinstance(node, UnaryFilter):
        return 1 + filter_depth(node.child)
    return 1 + max(filter_depth(node.left), filter_depth(node.right))


def apply_filter(f: FilterNode, src: RasterImage, max_depth: int = MAX_FILTER_DEPTH) -> RasterImage:
    """Evaluate the tree bottom-up on src; output has src's dimensions."""
    if filter_depth(f) > max_depth:
        raise DepthExceeded(f"filter depth {filter_depth(f)} > {max_depth}")
    return RasterImage(_apply(f, src))


def _apply(node: FilterNode, src: RasterImage) -> np.ndarray:
    if isinstance(node, Source):
        return src.array
    if isinstance(node, UnaryFilter):
        return _apply_unary(node, _apply(node.child, src))
    left = _apply(node.left, src)
    right = _apply(node.right, src)
    return _apply_binary(node.kind, left, right)


def _luma(arr: np.ndarray) -> np.ndarray:
    a = arr.astype(np.int64)
    return (299 * a[:, :, 0] + 587 * a[:, :, 1] + 114 * a[:, :, 2] + 500) // 1000


def _apply_unary(node: UnaryFilter, arr: np.ndarray) -> np.ndarray:
    kind = node.kind
    if kind == "blur":
        return box_blur(RasterImage(arr), int(node.param)).array
    if kind == "sharpen":
        blur = box_blur(RasterImage(arr), 1).array.astype(np.int64)
        return np.clip(2 * arr.astype(np.int64) - blur, 0, 255).astype(np.uint8)
    if kind == "emboss":
        padded = np.pad(arr.astype(np.int64), ((1, 1), (1, 1), (0, 0)), mode="edge")
        top_left = padded[:-2, :-2]
        return np.clip(arr.astype(np.int64) - top_left + 128, 0, 255).astype(np.uint8)
    if kind == "invert":
        return (255 - arr.astype(np.int64)).astype(np.uint8)
    if kind == "grayscale":
        return np.repeat(_luma(arr)[:, :, None], 3, axis=2).astype(np.uint8)
    if kind == "threshold":
        out = np.zeros_like(arr)
        out[_luma(arr) >= int(node.param)] = 255
        return out
    if kind == "channel_swap":
        perm = _SWAP_PERMS[node.param]
        return arr[:, :, perm]
    if kind == "posterize":
        levels = int(node.param)
        a = arr.astype(np.int64)
        q = (2 * a * (levels - 1) + 255) // (2 * 255)
        return ((2 * q * 255 + (levels - 1)) // (2 * (levels - 1))).astype(np.uint8)
    if kind == "hue_rotate":
        return _hue_rotate(arr, float(node.param))
    raise ValueError(f"unknown unary filter {kind!r}")


def _hue_rotate(arr: np.ndarray, degrees: float) -> np.ndarray:
    # SVG feColorMatrix type="hueRotate" linear approximation
    c = np.cos(np.deg2rad(degrees))
    s = np.sin(np.deg2rad(degrees))
    m = np.array([
        [0.213 + 0.787 * c - 0.213 * s, 0.715 - 0.715 * c - 0.715 * s, 0.072 - 0.072 * c + 0.928 * s],
        [0.213 - 0.213 * c + 0.143 * s, 0.715 + 0.285 * c + 0.140 * s, 0.072 - 0.072 * c - 0.283 * s],
        [0.213 - 0.213 * c - 0.787 * s, 0.715 - 0.715 * c + 0.715 * s, 0.072 + 0.928 * c + 0.072 * s],
    ])
    out = arr.astype(np.float64) @ m.T
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def _apply_binary(kind: str, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    if kind == "and":
        return left & right
    if kind == "or":
        return left | right
    if kind == "xor":
        return left ^ right
    l64 = left.astype(np.int64)
    r64 = right.astype(np.int64)
    if kind == "add_sat":
        return np.clip(l64 + r64, 0, 255).astype(np.uint8)
    if kind == "subtract_sat":
        return np.clip(l64 - r64, 0, 255).astype(np.uint8)
    if kind == "multiply":
        return ((l64 * r64) // 255).astype(np.uint8)
    if kind == "screen":
        return (255 - ((255 - l64) * (255 - r64)) // 255).astype(np.uint8)
    if kind == "min":
        return np.minimum(left, right)
    if kind == "max":
        return np.maximum(left, right)
    raise ValueError(f"unknown binary filter {kind!r}")


# ----------------------------------------------------------------------
# Random libraries
# ----------------------------------------------------------------------

def random_filter_library(seed: int, count: int, max_depth: int = MAX_FILTER_DEPTH) -> FilterLibrary:
    """Sample count filter trees; identical seed gives an identical library."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 1 <= max_depth <= MAX_FILTER_DEPTH:
        raise ValueError(f"max_depth must be in [1, {MAX_FILTER_DEPTH}]")
    rng = random.Random(seed)
    return FilterLibrary([_random_filter(rng, max_depth) for _ in range(count)], seed)


def _random_filter(rng: random.Random, budget: int) -> FilterNode:
    if budget <= 0:
        return Source()
    if budget == 1:
        if rng.random() < 0.2:
            return Source()
        return _random_unary(rng, Source())
    roll = rng.random()
    if roll < 0.15:
        return Source()
    if roll < 0.60:
        return _random_unary(rng, _random_filter(rng, budget - 1))
    return BinaryFilter(rng.choice(BINARY_KINDS),
                        _random_filter(rng, budget - 1),
                        _random_filter(rng, budget - 1))


def _random_unary(rng: random.Random, child: FilterNode) -> UnaryFilter:
    kind = rng.choice(UNARY_KINDS)
    param = None
    if kind == "blur":
        param = rng.choice((1, 2, 3))
    elif kind == "threshold":
        param = rng.randint(64, 192)
    elif kind == "channel_swap":
        param = rng.choice(_SWAP_CODES)
    elif kind == "posterize":
        param = rng.randint(2, 6)
    elif kind == "hue_rotate":
        param = round(rng.uniform(0.0, 360.0), 2) % 360.0
    return UnaryFilter(kind, child, param)


# ----------------------------------------------------------------------
# Sidecar text form, e.g. (xor (blur 2 source) source)
# ----------------------------------------------------------------------

_PARAM_KINDS = ("blur", "threshold", "channel_swap", "posterize", "hue_rotate")


def filter_to_sexpr(node: FilterNode) -> str:
    if isinstance(node, Source):
        return "source"
    if isinstance(node, UnaryFilter):
        if node.kind in _PARAM_KINDS:
            return f"({node.kind} {node.param} {filter_to_sexpr(node.child)})"
        return f"({node.kind} {filter_to_sexpr(node.child)})"
    return f"({node.kind} {filter_to_sexpr(node.left)} {filter_to_sexpr(node.right)})"


def filter_from_sexpr(text: str) -> FilterNode:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    node, rest = _parse_filter(tokens)
    if rest:
        raise ValueError(f"trailing tokens: {' '.join(rest)}")
    return node


def _parse_filter(tokens: list[str]) -> tuple[FilterNode, list[str]]:
    tok, rest = tokens[0], tokens[1:]
    if tok == "source":
        return Source(), rest
    if tok != "(":
        raise ValueError(f"unexpected token {tok!r}")
    kind, rest = rest[0], rest[1:]
    if kind in UNARY_KINDS:
        param = None
        if kind in _PARAM_KINDS:
            raw, rest = rest[0], rest[1:]
            if kind == "hue_rotate":
                param = float(raw)
            elif kind == "channel_swap":
                if raw not in _SWAP_CODES:
                    raise ValueError(f"bad channel_swap code {raw!r}")
                param = raw
            else:
                param = int(raw)
        child, rest = _parse_filter(rest)
        if not rest or rest[0] != ")":
            raise ValueError("unclosed filter expression")
        return UnaryFilter(kind, child, param), rest[1:]
    if kind in BINARY_KINDS:
        left, rest = _parse_filter(rest)
        right, rest = _parse_filter(rest)
        if not rest or rest[0] != ")":
            raise ValueError("unclosed filter expression")
        return BinaryFilter(kind, left, right), rest[1:]
    raise ValueError(f"unknown filter kind {kind!r}")

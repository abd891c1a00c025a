"""Per-pixel (x, y) -> (r, g, b) image generator.

Three expression trees over normalized coordinates x, y in [0, 1] are
evaluated at every pixel; each output is triangle-folded into [0, 1] and
scaled to the 0..255 channel range.
"""

from __future__ import annotations

import random

import numpy as np

from ..raster import RasterImage
from .expressions import ExprNode, Grammar, eval_expr, random_tree
from .particles import CanvasSpec, fold_to_range

__all__ = ["COORD_INPUTS", "render_coordinate_image", "random_coordinate_trees"]

COORD_INPUTS = ("x", "y")


def render_coordinate_image(r_tree: ExprNode, g_tree: ExprNode, b_tree: ExprNode,
                            canvas: CanvasSpec) -> RasterImage:
    w, h = canvas.width, canvas.height
    xs = np.arange(w, dtype=np.float64) / (w - 1) if w > 1 else np.zeros(1)
    ys = np.arange(h, dtype=np.float64) / (h - 1) if h > 1 else np.zeros(1)
    env = {"x": np.broadcast_to(xs, (h, w)), "y": np.broadcast_to(ys[:, None], (h, w))}
    arr = np.empty((h, w, 3), dtype=np.uint8)
    for ch, tree in enumerate((r_tree, g_tree, b_tree)):
        values = np.broadcast_to(np.asarray(eval_expr(tree, env)), (h, w))
        arr[:, :, ch] = np.floor(fold_to_range(values, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return RasterImage(arr)


def random_coordinate_trees(seed: int, grammar: Grammar = Grammar()) -> tuple[ExprNode, ExprNode, ExprNode]:
    rng = random.Random(seed)
    return tuple(random_tree(rng, COORD_INPUTS, grammar) for _ in range(3))

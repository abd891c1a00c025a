"""Particle-trail image generator.

A genome is 10 expression trees: five initialisation functions i1..i5
computing each particle's starting (x, y, r, g, b) from its number p, and
five updating functions u1..u5 recomputing those values at each timestep t.
Update functions may read p, t and the prior values of all ten functions
(f1..f10); within a timestep, u_k already sees the values u_1..u_{k-1}
produced at t. After every timestep each particle draws a line from its
previous position to its new one (optionally remapped by a line transform)
in its new color, then the whole canvas is blurred.

Function outputs are unconstrained reals; they are mapped onto the canvas
and color ranges by triangular folding into [0, W-1], [0, H-1] and
[0, 255] at render time only — the raw values remain the dynamical state.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import UnboundInput
from ..raster import RasterImage, box_blur, draw_segment
from .expressions import (
    ExprNode,
    Grammar,
    eval_expr,
    mutate_tree,
    random_tree,
    to_sexpr,
    tree_inputs,
    parse_sexpr,
)
from .transforms import Ellipse, LineTransform, Segment, apply_line_transform

__all__ = [
    "INIT_INPUTS",
    "UPDATE_INPUTS",
    "CanvasSpec",
    "ParticleGenome",
    "random_genome",
    "mutate_genome",
    "render_particle_image",
    "background_color",
    "fold_to_range",
    "genome_to_text",
    "genome_from_text",
]

INIT_INPUTS = ("p",)
UPDATE_INPUTS = ("p", "t", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10")


@dataclass(frozen=True)
class CanvasSpec:
    width: int
    height: int
    particle_count: int = 1000
    timesteps: int = 100
    blur_radius: int = 1
    background: object = "random-monotone"  # RGB triple or "random-monotone"

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("canvas must be at least 16x16")
        if self.particle_count < 1:
            raise ValueError("particle_count must be >= 1")
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if self.blur_radius < 0:
            raise ValueError("blur_radius must be >= 0")


@dataclass(frozen=True)
class ParticleGenome:
    init_fns: tuple[ExprNode, ...]    # i1..i5, inputs {p}
    update_fns: tuple[ExprNode, ...]  # u1..u5, inputs {p, t, f1..f10}
    rng_seed: int

    def __post_init__(self):
        if len(self.init_fns) != 5 or len(self.update_fns) != 5:
            raise ValueError("genome needs 5 init and 5 update functions")
        for tree in self.init_fns:
            extra = tree_inputs(tree) - set(INIT_INPUTS)
            if extra:
                raise UnboundInput(sorted(extra)[0])
        for tree in self.update_fns:
            extra = tree_inputs(tree) - set(UPDATE_INPUTS)
            if extra:
                raise UnboundInput(sorted(extra)[0])


def random_genome(seed: int, grammar: Grammar = Grammar()) -> ParticleGenome:
    """Sample a genome; identical (seed, grammar) gives identical genomes."""
    rng = random.Random(seed)
    init_fns = tuple(random_tree(rng, INIT_INPUTS, grammar) for _ in range(5))
    update_fns = tuple(random_tree(rng, UPDATE_INPUTS, grammar) for _ in range(5))
    return ParticleGenome(init_fns, update_fns, rng_seed=rng.getrandbits(63))


def mutate_genome(genome: ParticleGenome, seed: int, rate: float,
                  grammar: Grammar = Grammar()) -> ParticleGenome:
    """Independently replace each node with probability rate by a fresh subtree."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    rng = random.Random(seed)
    init_fns = tuple(mutate_tree(t, rng, rate, INIT_INPUTS, grammar) for t in genome.init_fns)
    update_fns = tuple(mutate_tree(t, rng, rate, UPDATE_INPUTS, grammar) for t in genome.update_fns)
    return ParticleGenome(init_fns, update_fns, rng_seed=genome.rng_seed)


def fold_to_range(values, upper: float):
    """Triangle-fold reals into [0, upper] (reflecting, not wrapping)."""
    if upper <= 0:
        return np.zeros_like(np.asarray(values, dtype=np.float64))
    w = np.mod(np.asarray(values, dtype=np.float64), 2.0 * upper)
    return np.where(w <= upper, w, 2.0 * upper - w)


def _half_up(values) -> np.ndarray:
    return np.floor(np.asarray(values) + 0.5).astype(np.int64)


def _iround(v: float) -> int:
    return int(math.floor(v + 0.5))


def background_color(canvas: CanvasSpec, genome: ParticleGenome) -> tuple[int, int, int]:
    """The monotone background a render will use (drawn from the genome's
    rng_seed when the canvas asks for "random-monotone")."""
    if canvas.background == "random-monotone":
        rng = random.Random(genome.rng_seed)
        return (rng.randrange(256), rng.randrange(256), rng.randrange(256))
    r, g, b = canvas.background
    return (int(r), int(g), int(b))


def render_particle_image(genome: ParticleGenome, canvas: CanvasSpec,
                          transform: LineTransform = LineTransform()) -> RasterImage:
    """Deterministically render one particle image; bit-identical for
    identical (genome, canvas, transform)."""
    w, h = canvas.width, canvas.height
    n = canvas.particle_count
    arr = np.empty((h, w, 3), dtype=np.uint8)
    arr[:, :] = background_color(canvas, genome)

    p = np.arange(1, n + 1, dtype=np.float64)
    state = np.zeros((10, n), dtype=np.float64)
    init_env = {"p": p}
    for k in range(5):
        state[k] = eval_expr(genome.init_fns[k], init_env)
    state[5:10] = state[0:5]

    env = {"p": p, "t": 0.0}
    for k in range(10):
        env[f"f{k + 1}"] = state[k]  # views; row writes stay visible

    prev_x = fold_to_range(state[5], w - 1)
    prev_y = fold_to_range(state[6], h - 1)

    buf = arr
    for t in range(1, canvas.timesteps + 1):
        env["t"] = float(t)
        for k in range(5):
            state[5 + k] = eval_expr(genome.update_fns[k], env)
        new_x = fold_to_range(state[5], w - 1)
        new_y = fold_to_range(state[6], h - 1)
        colors = _half_up(fold_to_range(state[7:10], 255.0)).astype(np.uint8).T

        for i in range(n):
            prims = apply_line_transform(
                transform, (prev_x[i], prev_y[i], new_x[i], new_y[i]), canvas)
            _draw_primitives(buf, prims, colors[i])
        buf = box_blur(RasterImage(buf), canvas.blur_radius).array
        prev_x, prev_y = new_x, new_y
    return RasterImage(buf)


def _draw_primitives(buf: np.ndarray, prims: Sequence, color) -> None:
    for prim in prims:
        if isinstance(prim, Segment):
            draw_segment(buf, _iround(prim.x0), _iround(prim.y0),
                         _iround(prim.x1), _iround(prim.y1), color)
        elif isinstance(prim, Ellipse):
            _draw_ellipse(buf, prim, color)
        else:
            raise TypeError(f"unknown primitive {prim!r}")


def _draw_ellipse(buf: np.ndarray, e: Ellipse, color) -> None:
    cx, cy = (e.fx0 + e.fx1) / 2.0, (e.fy0 + e.fy1) / 2.0
    c = math.hypot(e.fx1 - e.fx0, e.fy1 - e.fy0) / 2.0
    a = e.major_axis / 2.0
    if a <= 0:
        draw_segment(buf, _iround(cx), _iround(cy), _iround(cx), _iround(cy), color)
        return
    b = math.sqrt(max(a * a - c * c, 0.0))
    rot = math.atan2(e.fy1 - e.fy0, e.fx1 - e.fx0) if c > 0 else 0.0
    steps = min(max(12, int(2.0 * math.pi * a)), 4096)
    theta = np.linspace(0.0, 2.0 * math.pi, steps + 1)
    ex = a * np.cos(theta)
    ey = b * np.sin(theta)
    xs = _half_up(cx + ex * math.cos(rot) - ey * math.sin(rot))
    ys = _half_up(cy + ex * math.sin(rot) + ey * math.cos(rot))
    for i in range(steps):
        draw_segment(buf, int(xs[i]), int(ys[i]), int(xs[i + 1]), int(ys[i + 1]), color)


# ----------------------------------------------------------------------
# Sidecar text form: one labeled s-expression per line
# ----------------------------------------------------------------------

_SLOTS = ("i1", "i2", "i3", "i4", "i5", "u1", "u2", "u3", "u4", "u5")


def genome_to_text(genome: ParticleGenome) -> str:
    lines = [f"seed {genome.rng_seed}"]
    for name, tree in zip(_SLOTS, genome.init_fns + genome.update_fns):
        lines.append(f"{name} {to_sexpr(tree)}")
    return "\n".join(lines) + "\n"


def genome_from_text(text: str) -> ParticleGenome:
    trees: dict[str, ExprNode] = {}
    seed = 0
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        label, _, body = line.partition(" ")
        if label == "seed":
            seed = int(body)
        else:
            trees[label] = parse_sexpr(body)
    missing = [s for s in _SLOTS if s not in trees]
    if missing:
        raise ValueError(f"genome text missing {missing}")
    return ParticleGenome(tuple(trees[s] for s in _SLOTS[:5]),
                          tuple(trees[s] for s in _SLOTS[5:]), rng_seed=seed)

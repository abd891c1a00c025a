"""Generative abstract imagery: expression trees, particle trails,
coordinate functions and line transforms."""

from .coordinate import COORD_INPUTS, random_coordinate_trees, render_coordinate_image
from .expressions import (
    BINARY_OPS,
    UNARY_OPS,
    Binary,
    Constant,
    ExprNode,
    Grammar,
    Input,
    Unary,
    eval_expr,
    mutate_tree,
    parse_sexpr,
    random_tree,
    to_sexpr,
    tree_depth,
    tree_inputs,
)
from .particles import (
    CanvasSpec,
    background_color,
    ParticleGenome,
    fold_to_range,
    genome_from_text,
    genome_to_text,
    mutate_genome,
    random_genome,
    render_particle_image,
)
from .transforms import (
    TRANSFORM_KINDS,
    Ellipse,
    LineTransform,
    Segment,
    apply_line_transform,
)

__all__ = [
    "BINARY_OPS",
    "COORD_INPUTS",
    "TRANSFORM_KINDS",
    "UNARY_OPS",
    "Binary",
    "CanvasSpec",
    "Constant",
    "Ellipse",
    "ExprNode",
    "Grammar",
    "Input",
    "LineTransform",
    "ParticleGenome",
    "Segment",
    "Unary",
    "apply_line_transform",
    "background_color",
    "eval_expr",
    "fold_to_range",
    "genome_from_text",
    "genome_to_text",
    "mutate_genome",
    "mutate_tree",
    "parse_sexpr",
    "random_coordinate_trees",
    "random_genome",
    "random_tree",
    "render_coordinate_image",
    "render_particle_image",
    "to_sexpr",
    "tree_depth",
    "tree_inputs",
]

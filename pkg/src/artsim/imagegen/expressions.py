"""Closed-form numeric expression trees: the genome of all generated imagery.

A tree is built from constants, named inputs and a fixed set of unary /
binary operators. Evaluation is *total*: division by zero, log of a
non-positive value, 0 raised to a negative power and any other non-finite
intermediate all collapse to 0.0, so every tree yields a finite real for
every bound environment.

Evaluation is vectorized: environment values may be numpy arrays (one entry
per particle, or per pixel), in which case the result has the broadcast
shape. Scalar environments return plain floats.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import UnboundInput

__all__ = [
    "Constant",
    "Input",
    "Unary",
    "Binary",
    "ExprNode",
    "UNARY_OPS",
    "BINARY_OPS",
    "Grammar",
    "eval_expr",
    "tree_depth",
    "tree_inputs",
    "random_tree",
    "mutate_tree",
    "to_sexpr",
    "parse_sexpr",
]

UNARY_OPS = ("sin", "cos", "tan", "exp", "log", "abs", "sqrt", "negate")
BINARY_OPS = ("add", "sub", "mul", "div", "mod", "pow", "min", "max")


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Input:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    child: "ExprNode"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprNode"
    right: "ExprNode"


ExprNode = Union[Constant, Input, Unary, Binary]

_UNARY_FN = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "negate": np.negative,
}

_BINARY_FN = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "mod": np.mod,
    "pow": np.power,
    "min": np.minimum,
    "max": np.maximum,
}


def _finite(x):
    """Totalization rule: any non-finite value becomes 0.0."""
    return np.where(np.isfinite(x), x, 0.0)


def eval_expr(tree: ExprNode, env: dict):
    """Evaluate a tree against an environment of input bindings.

    Raises UnboundInput if the tree references a symbol missing from env.
    Returns a float for scalar environments, an ndarray for array ones.
    """
    with np.errstate(all="ignore"):
        result = _eval(tree, env)
    if np.ndim(result) == 0:
        return float(result)
    return result


def _eval(tree: ExprNode, env: dict):
    if isinstance(tree, Constant):
        return np.float64(tree.value)
    if isinstance(tree, Input):
        try:
            value = env[tree.name]
        except KeyError:
            raise UnboundInput(tree.name) from None
        return np.asarray(value, dtype=np.float64)
    if isinstance(tree, Unary):
        return _finite(_UNARY_FN[tree.op](_eval(tree.child, env)))
    if isinstance(tree, Binary):
        return _finite(_BINARY_FN[tree.op](_eval(tree.left, env), _eval(tree.right, env)))
    raise TypeError(f"not an expression node: {tree!r}")


def tree_depth(tree: ExprNode) -> int:
    """Depth in node levels; a bare leaf has depth 1."""
    if isinstance(tree, (Constant, Input)):
        return 1
    if isinstance(tree, Unary):
        return 1 + tree_depth(tree.child)
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def tree_inputs(tree: ExprNode) -> set[str]:
    if isinstance(tree, Constant):
        return set()
    if isinstance(tree, Input):
        return {tree.name}
    if isinstance(tree, Unary):
        return tree_inputs(tree.child)
    return tree_inputs(tree.left) | tree_inputs(tree.right)


# ----------------------------------------------------------------------
# Random generation and mutation
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Grammar:
    """Depth and operator-weight configuration for random trees.

    branch_weights are the relative odds of (leaf, unary, binary) at any
    position where depth budget remains; a position with budget 1 is always
    a leaf. const_range bounds constant leaves; p_constant is the chance a
    leaf is a constant rather than an input symbol.
    """

    max_depth: int = 12
    branch_weights: tuple[float, float, float] = (1.0, 1.5, 2.0)
    p_constant: float = 0.4
    const_range: tuple[float, float] = (-5.0, 5.0)
    unary_ops: tuple[str, ...] = UNARY_OPS
    binary_ops: tuple[str, ...] = BINARY_OPS

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max depth must be >= 1")


def random_tree(rng: random.Random, inputs: tuple[str, ...], grammar: Grammar,
                budget: int | None = None) -> ExprNode:
    """Sample a random tree whose depth is <= budget (grammar.max_depth by default)."""
    if budget is None:
        budget = grammar.max_depth
    if budget <= 1:
        return _random_leaf(rng, inputs, grammar)
    kind = rng.choices(("leaf", "unary", "binary"), weights=grammar.branch_weights)[0]
    if kind == "leaf":
        return _random_leaf(rng, inputs, grammar)
    if kind == "unary":
        return Unary(rng.choice(grammar.unary_ops),
                     random_tree(rng, inputs, grammar, budget - 1))
    return Binary(rng.choice(grammar.binary_ops),
                  random_tree(rng, inputs, grammar, budget - 1),
                  random_tree(rng, inputs, grammar, budget - 1))


def _random_leaf(rng: random.Random, inputs: tuple[str, ...], grammar: Grammar) -> ExprNode:
    if not inputs or rng.random() < grammar.p_constant:
        lo, hi = grammar.const_range
        return Constant(round(rng.uniform(lo, hi), 4))
    return Input(rng.choice(inputs))


def mutate_tree(tree: ExprNode, rng: random.Random, rate: float,
                inputs: tuple[str, ...], grammar: Grammar, depth: int = 1) -> ExprNode:
    """Replace each node, independently with probability rate, by a fresh
    random subtree sized to keep the whole tree within grammar.max_depth."""
    if rng.random() < rate:
        return random_tree(rng, inputs, grammar, grammar.max_depth - depth + 1)
    if isinstance(tree, Unary):
        return Unary(tree.op, mutate_tree(tree.child, rng, rate, inputs, grammar, depth + 1))
    if isinstance(tree, Binary):
        return Binary(tree.op,
                      mutate_tree(tree.left, rng, rate, inputs, grammar, depth + 1),
                      mutate_tree(tree.right, rng, rate, inputs, grammar, depth + 1))
    return tree


# ----------------------------------------------------------------------
# S-expression serialization (prefix notation), e.g. (add (sin t) p)
# ----------------------------------------------------------------------

def to_sexpr(tree: ExprNode) -> str:
    if isinstance(tree, Constant):
        return repr(tree.value)
    if isinstance(tree, Input):
        return tree.name
    if isinstance(tree, Unary):
        return f"({tree.op} {to_sexpr(tree.child)})"
    return f"({tree.op} {to_sexpr(tree.left)} {to_sexpr(tree.right)})"


def parse_sexpr(text: str) -> ExprNode:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise ValueError("empty expression")
    tree, rest = _parse(tokens)
    if rest:
        raise ValueError(f"trailing tokens: {' '.join(rest)}")
    return tree


def _parse(tokens: list[str]) -> tuple[ExprNode, list[str]]:
    tok, rest = tokens[0], tokens[1:]
    if tok == "(":
        if not rest:
            raise ValueError("unclosed expression")
        op, rest = rest[0], rest[1:]
        args = []
        while rest and rest[0] != ")":
            arg, rest = _parse(rest)
            args.append(arg)
        if not rest:
            raise ValueError("unclosed expression")
        rest = rest[1:]  # consume ")"
        if op in UNARY_OPS and len(args) == 1:
            return Unary(op, args[0]), rest
        if op in BINARY_OPS and len(args) == 2:
            return Binary(op, args[0], args[1]), rest
        raise ValueError(f"bad operator or arity: ({op} …) with {len(args)} args")
    if tok == ")":
        raise ValueError("unexpected )")
    try:
        return Constant(float(tok)), rest
    except ValueError:
        return Input(tok), rest

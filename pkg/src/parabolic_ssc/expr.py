"""A tiny arithmetic language for field expressions in config files.

Variables ``x``, ``y``, ``z`` are the spatial coordinates (as many as the
domain has), ``t`` is time, ``pi`` and ``e`` are constants.  Operators are
``+ - * /`` and ``^`` (or ``**``) for powers; functions are
``sin cos exp abs min max``.  Parsing goes through :mod:`ast` and only the
node types listed here are accepted, so nothing can be executed.
"""

from __future__ import annotations

import ast
import operator
from typing import Callable

import numpy as np


class ExpressionError(ValueError):
    pass


_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: np.power,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": (np.sin, 1), "cos": (np.cos, 1), "exp": (np.exp, 1), "abs": (np.abs, 1),
          "min": (np.minimum, 2), "max": (np.maximum, 2)}
_CONSTS = {"pi": np.pi, "e": np.e}
_COORDS = ("x", "y", "z")


def _check(node: ast.AST, names: set[str], src: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, names, src)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed in {src!r}")
        _check(node.left, names, src)
        _check(node.right, names, src)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ExpressionError(f"unary operator not allowed in {src!r}")
        _check(node.operand, names, src)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals allowed in {src!r}")
    elif isinstance(node, ast.Name):
        if node.id not in names and node.id not in _CONSTS:
            raise ExpressionError(f"unknown name {node.id!r} in {src!r}")
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
            raise ExpressionError(f"unknown function call in {src!r}")
        arity = _FUNCS[node.func.id][1]
        if len(node.args) != arity:
            raise ExpressionError(f"{node.func.id} takes {arity} argument(s) in {src!r}")
        for a in node.args:
            _check(a, names, src)
    else:
        raise ExpressionError(f"unsupported syntax {type(node).__name__} in {src!r}")


def _eval(node: ast.AST, env: dict):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    fn = _FUNCS[node.func.id][0]
    return fn(*(_eval(a, env) for a in node.args))


def compile_expression(src, dim: int, with_time: bool = True) -> Callable:
    """Return ``f(coords, t)`` (or ``f(coords)``) evaluating ``src`` on an (m, dim) array."""
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(float(src))
    if not isinstance(src, str):
        raise ExpressionError(f"expression must be a string or number, got {type(src).__name__}")
    if dim > len(_COORDS):
        raise ExpressionError(f"expressions support at most {len(_COORDS)} spatial dimensions")
    names = set(_COORDS[:dim]) | ({"t"} if with_time else set())
    try:
        # as Python XOR, ^ would bind looser than + and -
        tree = ast.parse(src.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None
    _check(tree, names, src)

    def field(coords, t=0.0):
        coords = np.asarray(coords, dtype=float)
        env = {_COORDS[i]: coords[:, i] for i in range(dim)}
        env["t"] = float(t)
        out = _eval(tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (coords.shape[0],)).copy()

    if with_time:
        return field
    return lambda coords: field(coords)

"""Minimal arithmetic expression grammar for experiment configs.

Supported: ``+ - * /``, parentheses, ``**`` powers, ``sin``, ``cos``,
``exp``, numeric literals, ``pi``, and the coordinate names declared by the
caller (``x``, ``y``, ``t``).  Parsing rides on the Python ``ast`` module with
a strict whitelist; anything else is rejected with the offending position.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ExpressionError

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": np.pi}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_UNARY = {ast.UAdd: lambda v: v, ast.USub: np.negative}


def compile_expression(text: str, variables: tuple[str, ...]):
    """Compile an expression string into ``f(**variables) -> ndarray``.

    Raises :class:`ExpressionError` naming the expression and position on any
    syntax error or use of a name outside the grammar.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string", repr(text))
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError("syntax error", text, exc.offset) from None

    def validate(node: ast.AST) -> None:
        if isinstance(node, ast.Expression):
            validate(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            validate(node.left)
            validate(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            validate(node.operand)
        elif isinstance(node, ast.Call):
            if (
                not isinstance(node.func, ast.Name)
                or node.func.id not in _FUNCTIONS
                or node.keywords
                or len(node.args) != 1
            ):
                raise ExpressionError(
                    "only sin(...), cos(...), exp(...) calls are allowed",
                    text,
                    node.col_offset,
                )
            validate(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id not in variables and node.id not in _CONSTANTS:
                raise ExpressionError(
                    f"unknown name {node.id!r} (allowed: {', '.join(variables)})",
                    text,
                    node.col_offset,
                )
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ExpressionError(
                    "only numeric literals are allowed", text, node.col_offset
                )
        else:
            raise ExpressionError(
                f"disallowed syntax {type(node).__name__}", text, getattr(node, "col_offset", None)
            )

    validate(tree)

    def evaluate(node: ast.AST, env: dict):
        if isinstance(node, ast.Expression):
            return evaluate(node.body, env)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](
                evaluate(node.left, env), evaluate(node.right, env)
            )
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](evaluate(node.operand, env))
        if isinstance(node, ast.Call):
            return _FUNCTIONS[node.func.id](evaluate(node.args[0], env))
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTANTS[node.id]
        return node.value  # ast.Constant

    def compiled(**env):
        with np.errstate(all="ignore"):
            out = evaluate(tree, env)
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise ExpressionError("expression produced non-finite values", text)
        return out

    compiled.source = text
    return compiled


def evaluate_on_nodes(text: str, coords: np.ndarray, t: float | None = None) -> np.ndarray:
    """Evaluate an expression on geometry nodes (x, optionally y, optionally t)."""
    names = ("x", "y")[: coords.shape[1]]
    variables = names + (("t",) if t is not None else ())
    fn = compile_expression(text, variables)
    env = {name: coords[:, i] for i, name in enumerate(names)}
    if t is not None:
        env["t"] = t
    values = fn(**env)
    return np.broadcast_to(values, (coords.shape[0],)).astype(float)

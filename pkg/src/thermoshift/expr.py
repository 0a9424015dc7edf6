"""Tiny whitelisted expression evaluator for branch maps, roofs and observables.

Expressions are parsed with :mod:`ast` and compiled against a numpy namespace,
so any compiled expression evaluates vectorized on arrays.  Allowed names are
``x`` (realized coordinate), ``h`` (flow height, observables only) and the
constants/functions below.
"""

import ast
import math

import numpy as np

_ALLOWED_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "atan": np.arctan,
}
_ALLOWED_CONSTS = {"pi": math.pi, "e": math.e}

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
)


class Expr:
    """Compiled arithmetic expression in the variables ``x`` (and ``h``)."""

    def __init__(self, text, variables=("x",)):
        self.text = text.strip()
        self.variables = tuple(variables)
        tree = ast.parse(self.text, mode="eval")
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED_NODES):
                raise ValueError(f"disallowed syntax {type(node).__name__!r} in expression {text!r}")
            if isinstance(node, ast.Name):
                if node.id not in self.variables and node.id not in _ALLOWED_FUNCS and node.id not in _ALLOWED_CONSTS:
                    raise ValueError(f"unknown name {node.id!r} in expression {text!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                    raise ValueError(f"disallowed call in expression {text!r}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ValueError(f"non-numeric constant in expression {text!r}")
        self._code = compile(tree, "<expr>", "eval")
        self._ns = dict(_ALLOWED_FUNCS)
        self._ns.update(_ALLOWED_CONSTS)

    def __call__(self, x, h=None):
        ns = dict(self._ns)
        ns["x"] = x
        if "h" in self.variables:
            ns["h"] = h
        return eval(self._code, {"__builtins__": {}}, ns)

    def __repr__(self):
        return f"Expr({self.text!r})"

"""Closed-form expressions in ``x``, ``y``, ``t``.

The grammar admits numbers, the variables ``x y t``, the constant ``pi``,
the parameters ``alpha`` and ``beta``, the operators ``+ - * / ^ **`` and
the functions ``sin cos exp abs sqrt``. Text is tokenized and checked
against that list before sympy ever sees it.
"""

import re

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import (convert_xor, parse_expr,
                                        standard_transformations)

x, y, t = sp.symbols("x y t", real=True)
alpha, beta = sp.symbols("alpha beta", real=True)

FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "abs": sp.Abs, "sqrt": sp.sqrt}
NAMES = {"x": x, "y": y, "t": t, "pi": sp.pi, "alpha": alpha, "beta": beta, **FUNCTIONS}

_TOKEN = re.compile(r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
  | (?P<ws>\s+)
""", re.VERBOSE)


class ExpressionError(ValueError):
    pass


def _check_tokens(text):
    pos = 0
    depth = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        if m.lastgroup == "name" and m.group() not in NAMES:
            raise ExpressionError(f"unknown name {m.group()!r} at column {pos + 1}")
        if m.group() == "(":
            depth += 1
        elif m.group() == ")":
            depth -= 1
            if depth < 0:
                raise ExpressionError(f"unbalanced ')' at column {pos + 1}")
        pos = m.end()
    if depth:
        raise ExpressionError("unbalanced '('")


def parse(text, params=None):
    """Parse ``text`` into a sympy expression, substituting ``params``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    _check_tokens(text)
    try:
        expr = parse_expr(text, local_dict=dict(NAMES),
                          transformations=standard_transformations + (convert_xor,),
                          evaluate=True)
    except (SyntaxError, TypeError, ValueError) as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from None
    if not isinstance(expr, sp.Expr):
        raise ExpressionError(f"{text!r} is not a scalar expression")
    if params:
        expr = expr.subs({NAMES[k]: v for k, v in params.items()})
    leftover = expr.free_symbols - {x, y, t}
    if leftover:
        names = ", ".join(sorted(str(s) for s in leftover))
        raise ExpressionError(f"{text!r}: no value given for {names}")
    return expr


def compile_expr(expr):
    """Vectorized ``f(x, y, t=0.0)`` for a sympy expression."""
    raw = sp.lambdify((x, y, t), expr, modules="numpy")

    def f(xv, yv, tv=0.0):
        out = raw(xv, yv, tv)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(xv))

    f.expr = expr
    return f


def compile_spatial(expr):
    """Vectorized ``f(x, y)`` of an expression evaluated at ``t = 0``."""
    g = compile_expr(expr.subs(t, 0))

    def f(xv, yv):
        return g(xv, yv)

    f.expr = expr
    return f


def laplacian(expr):
    return sp.diff(expr, x, 2) + sp.diff(expr, y, 2)


def gradient(expr):
    return sp.diff(expr, x), sp.diff(expr, y)


def depends_on_time(expr):
    return t in expr.free_symbols

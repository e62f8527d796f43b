"""Text rendering that the parser reads back to the identical node."""

from __future__ import annotations

from fractions import Fraction

from .nodes import Add, Call, Const, Div, Expr, Mul, Neg, Pow, Sub, Var, postorder

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Pow: 3}
_ATOM = 4
_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        text = str(int(value))
    else:
        text = repr(value)
    return f"({text})" if value < 0 else text


def _format_exponent(k: Fraction) -> str:
    if k.denominator == 1:
        return str(k.numerator)
    return f"({k.numerator}/{k.denominator})"


def _prec(node: Expr) -> int:
    return _PREC.get(type(node), _ATOM)


def to_text(e: Expr) -> str:
    text: dict[int, str] = {}
    for node in postorder([e]):
        if isinstance(node, Const):
            s = format_number(node.value)
        elif isinstance(node, Var):
            s = f"x{node.index}"
        elif isinstance(node, Call):
            s = f"{node.name}({text[id(node.arg)]})"
        elif isinstance(node, Neg):
            inner = text[id(node.arg)]
            if _prec(node.arg) <= 1:
                inner = f"({inner})"
            s = f"(-{inner})"
        elif isinstance(node, Pow):
            base = text[id(node.base)]
            if _prec(node.base) < _ATOM or (
                isinstance(node.base, Const) and node.base.value < 0
            ):
                if not base.startswith("(") or _prec(node.base) < _ATOM:
                    base = f"({base})"
            s = f"{base}^{_format_exponent(node.exponent)}"
        else:
            p = _PREC[type(node)]
            left, right = text[id(node.left)], text[id(node.right)]
            if _prec(node.left) < p:
                left = f"({left})"
            if _prec(node.right) <= p:
                right = f"({right})"
            s = f"{left}{_SYMBOL[type(node)]}{right}"
        text[id(node)] = s
    return text[id(e)]

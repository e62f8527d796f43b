"""Compile expression DAGs to straight-line Python for fast float evaluation.

Each distinct node becomes one local assignment, so shared subexpressions
are evaluated once per call.  Compiled callables are cached by the tuple of
root nodes.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Sequence

from .errors import DomainError
from .nodes import Add, Call, Const, Div, Expr, Mul, Neg, Pow, Sub, Var, postorder


def _log(v: float) -> float:
    if v <= 0.0:
        raise DomainError(f"log of non-positive value {v!r}")
    return math.log(v)


def _sqrt(v: float) -> float:
    if v < 0.0:
        raise DomainError(f"sqrt of negative value {v!r}")
    return math.sqrt(v)


def _rpow(v: float, k: float) -> float:
    if v <= 0.0:
        raise DomainError(f"fractional power of non-positive base {v!r}")
    return v**k


_NAMESPACE = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_log": _log,
    "_sqrt": _sqrt,
    "_atan": math.atan,
    "_rpow": _rpow,
}

_CACHE: dict[tuple[int, ...], Callable] = {}
_KEEP: dict[tuple[int, ...], tuple[Expr, ...]] = {}
_LOCK = threading.Lock()


def _source(roots: Sequence[Expr]) -> str:
    names: dict[int, str] = {}
    lines = ["def _f(x):"]
    used = sorted(set().union(*(r.variables for r in roots))) if roots else []
    for i in used:
        lines.append(f"    x{i} = x[{i}]")
    for n, node in enumerate(postorder(list(roots))):
        if isinstance(node, Const):
            names[id(node)] = repr(node.value)
            continue
        if isinstance(node, Var):
            names[id(node)] = f"x{node.index}"
            continue
        name = f"v{n}"
        if isinstance(node, (Add, Sub, Mul, Div)):
            op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
            rhs = f"{names[id(node.left)]} {op} {names[id(node.right)]}"
        elif isinstance(node, Neg):
            rhs = f"-{names[id(node.arg)]}"
        elif isinstance(node, Pow):
            k = node.exponent
            base = names[id(node.base)]
            if k.denominator == 1:
                rhs = f"{base} ** {int(k)}"
            else:
                rhs = f"_rpow({base}, {float(k)!r})"
        elif isinstance(node, Call):
            rhs = f"_{node.name}({names[id(node.arg)]})"
        else:  # pragma: no cover
            raise TypeError(type(node).__name__)
        lines.append(f"    {name} = {rhs}")
        names[id(node)] = name
    lines.append("    return (" + "".join(f"{names[id(r)]}, " for r in roots) + ")")
    return "\n".join(lines)


def compile_exprs(roots: Sequence[Expr]) -> Callable[[Sequence[float]], tuple]:
    """Return ``f(point) -> tuple`` evaluating every root at ``point``."""
    roots = tuple(roots)
    key = tuple(id(r) for r in roots)
    fn = _CACHE.get(key)
    if fn is not None:
        return fn
    ns = dict(_NAMESPACE)
    exec(compile(_source(roots), "<projgeom-expr>", "exec"), ns)
    raw = ns["_f"]

    def fn(point):
        try:
            return raw(tuple(map(float, point)))
        except ZeroDivisionError as exc:
            raise DomainError("division by zero") from exc
        except OverflowError as exc:
            raise DomainError("floating-point overflow") from exc
        except ValueError as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(str(exc)) from exc

    with _LOCK:
        _CACHE[key] = fn
        _KEEP[key] = roots
    return fn


def evaluate(e: Expr, point: Sequence[float]) -> float:
    return compile_exprs((e,))(point)[0]

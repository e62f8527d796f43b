"""Hash-consed expression DAG over chart coordinates x0..x{n-1}.

Every node is interned, so two structurally identical expressions are the
same Python object.  Equality and hashing are therefore identity based and
cheap, and the memo tables used by :func:`derive` and the code generator
share work across all expressions built in a process.

Nodes are built through the smart constructors (:func:`add`, :func:`mul`,
...) which apply light algebraic simplification: constant folding, neutral
and absorbing elements, double negation.  No further canonicalisation is
attempted.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "atan")

_TABLE: dict[tuple, "Expr"] = {}
_LOCK = threading.Lock()


class Expr:
    """Base class of all expression nodes.  Never instantiate directly."""

    __slots__ = ("_vars", "__weakref__")
    children: tuple["Expr", ...] = ()

    @property
    def variables(self) -> frozenset[int]:
        return self._vars

    def __repr__(self) -> str:
        from .printer import to_text

        return f"Expr({to_text(self)!r})"

    def __reduce__(self):
        # Rebuild through the interning table on unpickle.
        from .printer import to_text

        return (_from_text, (to_text(self),))


def _from_text(text: str) -> Expr:
    from .parser import parse_expr

    return parse_expr(text)


def _intern(cls, key: tuple, init: Callable[[Expr], None]) -> Expr:
    full = (cls, *key)
    node = _TABLE.get(full)
    if node is not None:
        return node
    with _LOCK:
        node = _TABLE.get(full)
        if node is None:
            node = object.__new__(cls)
            init(node)
            _TABLE[full] = node
    return node


class Const(Expr):
    __slots__ = ("value",)

    def __new__(cls, value: float):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        if value == 0.0:
            value = 0.0  # fold -0.0

        def init(node):
            node.value = value
            node._vars = frozenset()

        return _intern(cls, (value,), init)


class Var(Expr):
    __slots__ = ("index",)

    def __new__(cls, index: int):
        index = int(index)
        if index < 0:
            raise ValueError("variable index must be non-negative")

        def init(node):
            node.index = index
            node._vars = frozenset((index,))

        return _intern(cls, (index,), init)


class _Binary(Expr):
    __slots__ = ("left", "right")

    def __new__(cls, left: Expr, right: Expr):
        def init(node):
            node.left = left
            node.right = right
            node._vars = left._vars | right._vars

        return _intern(cls, (id(left), id(right)), init)

    @property
    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    __slots__ = ()


class Sub(_Binary):
    __slots__ = ()


class Mul(_Binary):
    __slots__ = ()


class Div(_Binary):
    __slots__ = ()


class Neg(Expr):
    __slots__ = ("arg",)

    def __new__(cls, arg: Expr):
        def init(node):
            node.arg = arg
            node._vars = arg._vars

        return _intern(cls, (id(arg),), init)

    @property
    def children(self):
        return (self.arg,)


class Pow(Expr):
    """``base ** exponent`` with a rational exponent."""

    __slots__ = ("base", "exponent")

    def __new__(cls, base: Expr, exponent: Fraction):
        exponent = Fraction(exponent)

        def init(node):
            node.base = base
            node.exponent = exponent
            node._vars = base._vars

        return _intern(cls, (id(base), exponent), init)

    @property
    def children(self):
        return (self.base,)


class Call(Expr):
    __slots__ = ("name", "arg")

    def __new__(cls, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")

        def init(node):
            node.name = name
            node.arg = arg
            node._vars = arg._vars

        return _intern(cls, (name, id(arg)), init)

    @property
    def children(self):
        return (self.arg,)


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(value)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, Fraction)):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an expression")


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# -- smart constructors ------------------------------------------------------


def add(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    if _is_const(b) and b.value < 0:
        return Sub(a, Const(-b.value))
    return Add(a, b)


def sub(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if a is b:
        return ZERO
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def neg(a) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, Sub):
        return Sub(a.right, a.left)
    if isinstance(a, Mul) and isinstance(a.left, Const):
        return mul(Const(-a.left.value), a.right)
    return Neg(a)


def mul(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_const(b) and not _is_const(a):
        a, b = b, a
    if _is_const(a):
        if _is_const(b):
            return Const(a.value * b.value)
        if a.value == 0.0:
            return ZERO
        if a.value == 1.0:
            return b
        if a.value == -1.0:
            return neg(b)
        if isinstance(b, Mul) and _is_const(b.left):
            return mul(Const(a.value * b.left.value), b.right)
        if isinstance(b, Neg):
            return mul(Const(-a.value), b.arg)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    if a is b:
        return power(a, 2)
    return Mul(a, b)


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if _is_const(b):
        if b.value == 0.0:
            return Div(a, b)  # fails at evaluation time, not construction
        if b.value == 1.0:
            return a
        if _is_const(a):
            return Const(a.value / b.value)
        if b.value == -1.0:
            return neg(a)
    if _is_const(a, 0.0):
        return ZERO
    if a is b:
        return ONE
    if isinstance(b, Neg):
        return neg(div(a, b.arg))
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return Div(a, b)


def power(base, exponent) -> Expr:
    base = as_expr(base)
    exponent = Fraction(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if exponent.denominator == 1 and (v != 0.0 or exponent > 0):
            return Const(v ** int(exponent))
        if v > 0:
            return Const(v ** float(exponent))
        return Pow(base, exponent)
    if isinstance(base, Pow):
        # (a^p)^q = a^(pq) is only safe when the inner power keeps sign.
        if base.exponent.denominator == 1 and exponent.denominator == 1:
            return power(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def call(name: str, arg) -> Expr:
    arg = as_expr(arg)
    if isinstance(arg, Const):
        v = arg.value
        try:
            if name == "log":
                if v > 0:
                    return Const(math.log(v))
            elif name == "sqrt":
                if v >= 0:
                    return Const(math.sqrt(v))
            else:
                return Const(getattr(math, name)(v))
        except OverflowError:
            pass
    return Call(name, arg)


def var(index: int) -> Var:
    return Var(index)


def total(terms: Iterable) -> Expr:
    """Sum of ``terms`` as a balanced tree (keeps derivative depth logarithmic)."""
    items = [as_expr(t) for t in terms]
    items = [t for t in items if not _is_const(t, 0.0)]
    if not items:
        return ZERO
    while len(items) > 1:
        nxt = [add(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


# -- traversal ---------------------------------------------------------------


def postorder(roots: Sequence[Expr]) -> list[Expr]:
    """Distinct nodes reachable from ``roots``, children before parents."""
    seen: set[int] = set()
    order: list[Expr] = []
    stack: list[tuple[Expr, bool]] = [(r, False) for r in reversed(roots)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in reversed(node.children):
            if id(child) not in seen:
                stack.append((child, False))
    return order


def rebuild(node: Expr, children: Sequence[Expr]) -> Expr:
    """Reconstruct ``node`` with new children through the smart constructors."""
    if isinstance(node, Add):
        return add(*children)
    if isinstance(node, Sub):
        return sub(*children)
    if isinstance(node, Mul):
        return mul(*children)
    if isinstance(node, Div):
        return div(*children)
    if isinstance(node, Neg):
        return neg(children[0])
    if isinstance(node, Pow):
        return power(children[0], node.exponent)
    if isinstance(node, Call):
        return call(node.name, children[0])
    return node


def substitute(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace variables by expressions, simultaneously."""
    mapping = {int(k): as_expr(v) for k, v in mapping.items()}
    if not (e.variables & mapping.keys()):
        return e
    done: dict[int, Expr] = {}
    for node in postorder([e]):
        if isinstance(node, Var):
            done[id(node)] = mapping.get(node.index, node)
        elif not (node.variables & mapping.keys()):
            done[id(node)] = node
        elif node.children:
            done[id(node)] = rebuild(node, [done[id(c)] for c in node.children])
        else:
            done[id(node)] = node
    return done[id(e)]


# -- symbolic differentiation -----------------------------------------------

_DERIVE_CACHE: dict[tuple[int, int], Expr] = {}


def derive(e: Expr, i: int) -> Expr:
    """Exact symbolic partial derivative d e / d x_i."""
    key = (id(e), i)
    hit = _DERIVE_CACHE.get(key)
    if hit is not None:
        return hit
    for node in postorder([e]):
        k = (id(node), i)
        if k in _DERIVE_CACHE:
            continue
        _DERIVE_CACHE[k] = _derive_node(node, i)
    return _DERIVE_CACHE[key]


def _d(node: Expr, i: int) -> Expr:
    return _DERIVE_CACHE[(id(node), i)]


def _derive_node(node: Expr, i: int) -> Expr:
    if i not in node.variables:
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Add):
        return add(_d(node.left, i), _d(node.right, i))
    if isinstance(node, Sub):
        return sub(_d(node.left, i), _d(node.right, i))
    if isinstance(node, Neg):
        return neg(_d(node.arg, i))
    if isinstance(node, Mul):
        a, b = node.left, node.right
        return add(mul(_d(a, i), b), mul(a, _d(b, i)))
    if isinstance(node, Div):
        a, b = node.left, node.right
        da, db = _d(a, i), _d(b, i)
        return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(node, Pow):
        k = node.exponent
        return mul(mul(Const(float(k)), power(node.base, k - 1)), _d(node.base, i))
    if isinstance(node, Call):
        a = node.arg
        da = _d(a, i)
        if node.name == "sin":
            outer = call("cos", a)
        elif node.name == "cos":
            outer = neg(call("sin", a))
        elif node.name == "exp":
            outer = node
        elif node.name == "log":
            return div(da, a)
        elif node.name == "sqrt":
            return div(da, mul(Const(2.0), node))
        elif node.name == "atan":
            return div(da, add(ONE, power(a, 2)))
        else:  # pragma: no cover - guarded by FUNCTIONS
            raise ValueError(node.name)
        return mul(outer, da)
    raise TypeError(f"cannot differentiate {type(node).__name__}")
